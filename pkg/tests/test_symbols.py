import numpy as np
import pytest

from src.Exceptions import NotElliptic, RealRoot, ValidationError, WrongHalfPlane, ZeroLeadingCoefficient
from src.Symbols import (SymbolRoots, TraceSymbolSystem, boundary_trace_solve, ellipticity_margin,
                         kernel_quadrature, random_admissible_point, random_root_tuple, residue_sum,
                         roots_inner, roots_outer, trace_kernel2, trace_kernel4)


def test_roots_are_ordered_by_half_plane():
    rho1, rho2 = roots_outer(0.0, -1.0)
    assert rho1 == pytest.approx(1j)
    assert rho2 == pytest.approx(-1j)
    lam1, lam2 = roots_inner(0.25, 0.0, -1.0)
    assert lam1 == pytest.approx(2j)
    assert lam2 == pytest.approx(-2j)


def test_real_root_raises():
    with pytest.raises(RealRoot):
        roots_outer(1.0, 4.0)


def test_zero_leading_coefficient():
    with pytest.raises(ZeroLeadingCoefficient):
        roots_inner(0.0, 1.0, -1.0)


def test_root_invariants_hold_at_random_points(rng):
    for _ in range(50):
        a, R, mu = random_admissible_point(rng)
        errors = SymbolRoots.at(a, R, mu).invariant_errors()
        assert errors["signs_ok"] == 1.0
        for key in ("sum_outer", "sum_inner", "product_outer", "product_inner"):
            assert errors[key] < 1e-12


@pytest.mark.parametrize("rho1, rho2, k, expected", [
    (1j, -1j, 0, np.pi),
    (2j, -2j, 1, 1j * np.pi),
    (1 + 1j, 1 - 1j, 0, np.pi),
])
def test_trace_kernel2_values(rho1, rho2, k, expected):
    assert trace_kernel2(rho1, rho2, k) == pytest.approx(expected)


def test_trace_kernel4_values():
    assert trace_kernel4(1j, -1j, 2j, -2j, 0) == pytest.approx(np.pi / 6)
    assert abs(trace_kernel4(1j, -1j, 2j, -2j, 1)) < 1e-15


def test_kernels_reject_bad_input():
    with pytest.raises(ValidationError):
        trace_kernel2(1j, -1j, 2)
    with pytest.raises(ValidationError):
        trace_kernel4(1j, -1j, 2j, -2j, 3)
    with pytest.raises(WrongHalfPlane):
        trace_kernel2(-1j, 1j, 0)


def test_kernel4_matches_residues_and_quadrature(rng):
    for _ in range(5):
        lam1, lam2, rho1, rho2 = random_root_tuple(rng)
        for k in (0, 1):
            closed = trace_kernel4(lam1, lam2, rho1, rho2, k)
            residues = 2j * np.pi * residue_sum([lam1, rho1], [lam2, rho2], k)
            assert closed == pytest.approx(residues, rel=1e-10)
            assert kernel_quadrature([lam1, rho1], [lam2, rho2], k) == pytest.approx(closed, rel=1e-6, abs=1e-8)


def test_kernel4_swap_symmetry_at_k0(rng):
    for _ in range(20):
        lam1, lam2, rho1, rho2 = random_root_tuple(rng)
        forward = trace_kernel4(lam1, lam2, rho1, rho2, 0)
        swapped = trace_kernel4(rho1, rho2, lam1, lam2, 0)
        assert swapped == pytest.approx(forward, rel=1e-12)


def test_kernel2_tail_term():
    # k = 1 integrand decays like 1/xi, the i pi tail carries the whole value here
    assert kernel_quadrature([2j], [-2j], 1) == pytest.approx(trace_kernel2(2j, -2j, 1), abs=1e-9)
    with pytest.raises(ValidationError):
        kernel_quadrature([2j], [-2j], 2)


def test_kernel4_stays_finite_near_confluence(rng):
    lam1, lam2, rho1, rho2 = random_root_tuple(rng, near_confluent=True)
    values = [trace_kernel4(lam1, lam2, rho1, rho2, k) for k in (0, 1)]
    assert all(np.isfinite(v) for v in values)


def test_boundary_trace_solve_by_hand():
    roots = SymbolRoots(2j, -2j, 1j, -1j)
    gamma1, gamma0 = boundary_trace_solve(roots, 0.0, 1.0)
    assert gamma1 == pytest.approx(1.0 / 12.0)
    assert gamma0 == pytest.approx(1j / 6.0)


def test_boundary_trace_solve_inverts_the_system(rng):
    a, R, mu = random_admissible_point(rng)
    roots = SymbolRoots.at(a, R, mu)
    system = TraceSymbolSystem.from_roots(roots)
    g2, g6 = system.apply(0.3 - 0.2j, 1.1 + 0.4j)
    gamma1, gamma0 = boundary_trace_solve(roots, g2, system.eliminate(g2, g6))
    assert gamma0 == pytest.approx(0.3 - 0.2j, rel=1e-9)
    assert gamma1 == pytest.approx(1.1 + 0.4j, rel=1e-9)


def test_degenerate_symbol_is_not_elliptic():
    roots = SymbolRoots(1j, -1j, -1j, -1j)
    with pytest.raises(NotElliptic):
        boundary_trace_solve(roots, 1.0, 1.0)


def test_ellipticity_margin(interval_problem):
    assert ellipticity_margin(interval_problem, -1.0, [0.0]) == pytest.approx(6.0)
    assert ellipticity_margin(interval_problem, -1.0, np.linspace(0.0, 10.0, 11)) > 0.0
    with pytest.raises(ValidationError):
        ellipticity_margin(interval_problem, -1.0, [])
