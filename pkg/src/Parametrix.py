import logging
from dataclasses import dataclass
from math import factorial
from typing import Dict, List, Optional, Tuple

import sympy as sp

from src.Exceptions import DepthTooLarge, StructureViolation, SymbolicOverflow

logger = logging.getLogger("itespec")

MAX_DEPTH = 8
DEFAULT_TERM_CAP = 200000

x, xi = sp.symbols("x xi")


def generic_symbols() -> Tuple[sp.Expr, sp.Expr]:
    """p2 = A(x) xi^2 + B(x) xi + C(x), p1 = D(x) xi + E(x) with undetermined coefficients"""
    A, B, C, D, E = (sp.Function(name)(x) for name in "ABCDE")
    return A * xi ** 2 + B * xi + C, D * xi + E


def _freeze(*exprs: sp.Expr) -> Tuple[List[sp.Expr], Dict[sp.Symbol, sp.Expr]]:
    """Replace coefficient functions and their derivatives by plain symbols so polynomial division applies"""
    atoms = set()
    for expr in exprs:
        atoms |= expr.atoms(sp.Derivative)
        atoms |= {f for f in expr.atoms(sp.Function) if f.free_symbols}
    # derivatives first so A(x) inside Derivative(A(x), x) is not substituted early
    ordered = sorted(atoms, key=lambda a: (0 if isinstance(a, sp.Derivative) else 1, sp.default_sort_key(a)))
    mapping = {atom: sp.Dummy(f"c{i}") for i, atom in enumerate(ordered)}
    frozen = [expr.subs(mapping, simultaneous=True) for expr in exprs]
    return frozen, {v: k for k, v in mapping.items()}


@dataclass(frozen=True)
class RationalSymbol:
    """numerator / p2**power with exact sympy arithmetic"""
    numerator: sp.Expr
    power: int
    p2: sp.Expr

    @classmethod
    def polynomial(cls, expr: sp.Expr, p2: sp.Expr) -> 'RationalSymbol':
        return cls(sp.expand(expr), 0, p2)

    def _raise_to(self, power: int) -> sp.Expr:
        return sp.expand(self.numerator * self.p2 ** (power - self.power))

    def __add__(self, other: 'RationalSymbol') -> 'RationalSymbol':
        power = max(self.power, other.power)
        return RationalSymbol(sp.expand(self._raise_to(power) + other._raise_to(power)), power, self.p2)

    def scale(self, factor: sp.Expr) -> 'RationalSymbol':
        return RationalSymbol(sp.expand(self.numerator * factor), self.power, self.p2)

    def diff(self, var: sp.Symbol, times: int = 1) -> 'RationalSymbol':
        """d(N/p2^e) = (dN p2 - e N dp2) / p2^(e+1)"""
        out = self
        for _ in range(times):
            N, e = out.numerator, out.power
            if e == 0:
                out = RationalSymbol(sp.expand(sp.diff(N, var)), 0, self.p2)
            else:
                numerator = sp.expand(sp.diff(N, var) * self.p2 - e * N * sp.diff(self.p2, var))
                out = RationalSymbol(numerator, e + 1, self.p2)
        return out

    def reduce(self) -> 'RationalSymbol':
        """Cancel common p2 factors by exact polynomial division"""
        if self.numerator == 0:
            return RationalSymbol(sp.Integer(0), 0, self.p2)
        (N, P), back = _freeze(self.numerator, self.p2)
        gens = sorted(N.free_symbols | P.free_symbols, key=sp.default_sort_key)
        power = self.power
        while power > 0:
            quotient, remainder = sp.div(N, P, *gens)
            if sp.expand(remainder) != 0:
                break
            N = sp.expand(quotient)
            power -= 1
        return RationalSymbol(sp.expand(N.subs(back, simultaneous=True)), power, self.p2)

    def is_zero(self) -> bool:
        return sp.expand(self.numerator) == 0

    def degree(self) -> int:
        """Total degree of the numerator in xi; -1 for the zero symbol"""
        if self.is_zero():
            return -1
        (N,), _ = _freeze(self.numerator)
        return sp.Poly(N, xi).degree()

    def term_count(self) -> int:
        return len(sp.Add.make_args(self.numerator))


def _terms_for_order(nu: int, q: Dict[int, RationalSymbol], p: Dict[int, sp.Expr],
                     skip_leading: bool) -> RationalSymbol:
    """sum over k - j + alpha = nu of (1/(alpha! i^alpha)) d_xi^alpha q_{-k} d_x^alpha p_j"""
    p2 = p[2]
    total = RationalSymbol(sp.Integer(0), 0, p2)
    for j, pj in p.items():
        for alpha in range(0, nu + 1):
            k = nu + j - alpha
            if k < 2 or k not in q:
                continue
            if skip_leading and (k, j, alpha) == (nu + 2, 2, 0):
                continue
            factor = sp.Rational(1, factorial(alpha)) * (-sp.I) ** alpha
            dp = sp.diff(pj, x, alpha) if alpha else pj
            if dp == 0:
                continue
            total = total + q[k].diff(xi, alpha).scale(factor * dp)
    return total


def parametrix_recursion(p2: sp.Expr, p1: sp.Expr, depth: int, term_cap: int = DEFAULT_TERM_CAP,
                         max_depth: int = MAX_DEPTH) -> List[RationalSymbol]:
    """
    [q_{-2}, ..., q_{-2-depth}] with q_{-2} = 1/p2 and
    q_{-nu-2} = -(1/p2) sum (1/(alpha! i^alpha)) d_xi^alpha q_{-k} d_x^alpha p_j
    over k - j + alpha = nu, (k, j, alpha) != (nu+2, 2, 0).
    """
    if depth < 0 or depth > max_depth:
        raise DepthTooLarge(f"Parametrix depth {depth} outside [0, {max_depth}]", {"depth": depth, "max_depth": max_depth})
    p2, p1 = sp.expand(sp.sympify(p2)), sp.expand(sp.sympify(p1))
    p = {2: p2, 1: p1} if p1 != 0 else {2: p2}
    q: Dict[int, RationalSymbol] = {2: RationalSymbol(sp.Integer(1), 1, p2)}
    for nu in range(1, depth + 1):
        rest = _terms_for_order(nu, q, p, skip_leading=True)
        term = RationalSymbol(sp.expand(-rest.numerator), rest.power + 1, p2).reduce()
        if term.term_count() > term_cap:
            raise SymbolicOverflow(f"q_-{nu + 2} has {term.term_count()} terms, cap {term_cap}",
                                   {"nu": nu + 2, "terms": term.term_count(), "cap": term_cap})
        q[nu + 2] = term
        logger.debug(f"q_-{nu + 2}: degree {term.degree()}, power {term.power}, {term.term_count()} terms")
    return [q[k] for k in range(2, depth + 3)]


def composition_residual(terms: List[RationalSymbol], p2: sp.Expr, p1: sp.Expr,
                         depth: Optional[int] = None) -> List[sp.Expr]:
    """
    Numerators of (q o p)_nu - delta_{nu,0} for nu = 0..depth, over a power of p2.
    All entries are zero exactly when the expansion equals 1 + O(h^{depth+1}).
    """
    p2, p1 = sp.expand(sp.sympify(p2)), sp.expand(sp.sympify(p1))
    depth = len(terms) - 1 if depth is None else depth
    p = {2: p2, 1: p1} if p1 != 0 else {2: p2}
    q = {k + 2: t for k, t in enumerate(terms)}
    residuals = []
    for nu in range(0, depth + 1):
        order = _terms_for_order(nu, q, p, skip_leading=False)
        if nu == 0:
            order = order + RationalSymbol(sp.Integer(-1), 0, p2)
        (N,), _ = _freeze(sp.expand(order.numerator))
        residuals.append(sp.expand(N))
    return residuals


def verify_parametrix_structure(terms: List[RationalSymbol]) -> List[Dict[str, object]]:
    """Records {nu, degree, denom_power, pass}; raises StructureViolation on the first failing nu"""
    records = []
    for offset, term in enumerate(terms):
        nu = offset + 2
        reduced = term.reduce()
        degree, power = reduced.degree(), reduced.power
        ok = degree <= 3 * nu - 6 and power <= 2 * nu - 3
        records.append({"nu": nu, "degree": degree, "denom_power": power, "pass": ok})
        if not ok:
            raise StructureViolation(f"q_-{nu} has degree {degree}, power {power}",
                                     {"nu": nu, "degree": degree, "denom_power": power,
                                      "max_degree": 3 * nu - 6, "max_power": 2 * nu - 3})
    return records
