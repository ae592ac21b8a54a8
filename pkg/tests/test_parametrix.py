import pytest
import sympy as sp

from src.Exceptions import DepthTooLarge, SymbolicOverflow
from src.Parametrix import (RationalSymbol, composition_residual, generic_symbols, parametrix_recursion,
                            verify_parametrix_structure, x, xi)


def test_leading_term_is_inverse_symbol():
    p2, p1 = generic_symbols()
    terms = parametrix_recursion(p2, p1, 0)
    assert len(terms) == 1
    assert terms[0].numerator == 1
    assert terms[0].power == 1


def test_constant_coefficients_have_no_corrections():
    p2 = xi ** 2 + 1
    terms = parametrix_recursion(p2, sp.Integer(0), 3)
    assert all(t.is_zero() for t in terms[1:])
    assert all(r == 0 for r in composition_residual(terms, p2, sp.Integer(0)))


def test_variable_coefficient_composition_is_exact():
    p2 = (1 + x ** 2) * xi ** 2 + 2
    p1 = x * xi
    terms = parametrix_recursion(p2, p1, 2)
    assert all(r == 0 for r in composition_residual(terms, p2, p1))
    assert not terms[1].is_zero()


def test_generic_recursion_structure():
    p2, p1 = generic_symbols()
    terms = parametrix_recursion(p2, p1, 2)
    assert all(r == 0 for r in composition_residual(terms, p2, p1))
    records = verify_parametrix_structure(terms)
    assert [r["nu"] for r in records] == [2, 3, 4]
    assert all(r["pass"] for r in records)
    assert records[0]["degree"] == 0 and records[0]["denom_power"] == 1


def test_truncated_parametrix_leaves_a_residual():
    p2 = (1 + x ** 2) * xi ** 2 + 2
    p1 = x * xi
    terms = parametrix_recursion(p2, p1, 1)
    residual = composition_residual(terms, p2, p1, depth=2)
    assert residual[0] == 0 and residual[1] == 0
    assert residual[2] != 0


def test_depth_limits():
    p2, p1 = generic_symbols()
    with pytest.raises(DepthTooLarge):
        parametrix_recursion(p2, p1, 9)
    with pytest.raises(DepthTooLarge):
        parametrix_recursion(p2, p1, -1)


def test_term_cap():
    p2, p1 = generic_symbols()
    with pytest.raises(SymbolicOverflow) as info:
        parametrix_recursion(p2, p1, 1, term_cap=1)
    assert info.value.details["nu"] == 3


def test_rational_symbol_reduce_cancels_factors():
    p2 = xi ** 2 + 1
    symbol = RationalSymbol(sp.expand(3 * p2 ** 2), 3, p2).reduce()
    assert symbol.power == 1
    assert sp.simplify(symbol.numerator - 3) == 0
