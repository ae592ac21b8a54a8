import cmath
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from src.Exceptions import NotElliptic, RealRoot, WrongHalfPlane, ZeroLeadingCoefficient, ValidationError

logger = logging.getLogger("itespec")

REAL_ROOT_TOLERANCE = 1e-12
ELLIPTICITY_THRESHOLD = 1e-10
TWO_PI_I = 2j * np.pi


@dataclass(frozen=True)
class SymbolRoots:
    """Characteristic roots at one boundary phase-space point"""
    rho1: complex
    rho2: complex
    lam1: complex
    lam2: complex
    R: float = 0.0
    mu: complex = -1.0
    a: complex = 1.0
    x: Optional[Tuple[float, ...]] = None

    @classmethod
    def at(cls, a_val: complex, R_val: float, mu: complex, x: Optional[Tuple[float, ...]] = None) -> 'SymbolRoots':
        rho1, rho2 = roots_outer(R_val, mu)
        lam1, lam2 = roots_inner(a_val, R_val, mu)
        return cls(rho1, rho2, lam1, lam2, float(R_val), complex(mu), complex(a_val), x)

    def invariant_errors(self) -> Dict[str, float]:
        """Deviations from the sign, sum and product relations"""
        scale_o = max(1.0, abs(self.R - self.mu))
        scale_i = max(1.0, abs(self.R - self.mu / self.a))
        return {
            "signs_ok": float(self.rho1.imag > 0 and self.rho2.imag < 0 and self.lam1.imag > 0 and self.lam2.imag < 0),
            "sum_outer": abs(self.rho1 + self.rho2),
            "sum_inner": abs(self.lam1 + self.lam2),
            "product_outer": abs(self.rho1 * self.rho2 - (self.R - self.mu)) / scale_o,
            "product_inner": abs(self.lam1 * self.lam2 - (self.R - self.mu / self.a)) / scale_i,
        }


def _ordered_pair(square: complex) -> Tuple[complex, complex]:
    root = cmath.sqrt(square)
    if abs(root.imag) < REAL_ROOT_TOLERANCE:
        raise RealRoot(f"Characteristic root {root} is real, ellipticity fails",
                       {"root": [root.real, root.imag], "tolerance": REAL_ROOT_TOLERANCE})
    # the principal branch alone mis-orders roots, swap so the first one sits in the upper half plane
    if root.imag < 0:
        root = -root
    return root, -root


def roots_outer(R_val: float, mu: complex) -> Tuple[complex, complex]:
    """Roots of xi^2 + R - mu, Im rho1 > 0 > Im rho2"""
    return _ordered_pair(complex(mu) - float(R_val))


def roots_inner(a_val: complex, R_val: float, mu: complex) -> Tuple[complex, complex]:
    """Roots of a(xi^2 + R) - mu, Im lam1 > 0 > Im lam2"""
    a_val = complex(a_val)
    if a_val == 0:
        raise ZeroLeadingCoefficient("Leading coefficient a vanishes", {"a": 0})
    return _ordered_pair(complex(mu) / a_val - float(R_val))


def _check_half_planes(upper: Sequence[complex], lower: Sequence[complex]) -> None:
    if any(p.imag <= 0 for p in upper) or any(p.imag >= 0 for p in lower):
        raise WrongHalfPlane("Roots are not in the half planes the kernel assumes",
                             {"upper": [[p.real, p.imag] for p in upper],
                              "lower": [[p.real, p.imag] for p in lower]})


def residue_sum(upper: Sequence[complex], lower: Sequence[complex], k: int = 0) -> complex:
    """
    Sum of residues at the upper poles of xi^k / prod(xi - p), p over upper and lower poles.
    Poles must be distinct.
    """
    poles = [complex(p) for p in upper] + [complex(p) for p in lower]
    total = 0j
    for i, p in enumerate(upper):
        p = complex(p)
        denominator = 1.0 + 0j
        for j, q in enumerate(poles):
            if j != i:
                denominator *= (p - q)
        total += p ** k / denominator
    return total


def trace_kernel2(rho1: complex, rho2: complex, k: int) -> complex:
    """2 i pi rho1^k / (rho1 - rho2)"""
    if k not in (0, 1):
        raise ValidationError(f"trace_kernel2 takes k in {{0, 1}}, got {k}", {"k": k})
    rho1, rho2 = complex(rho1), complex(rho2)
    _check_half_planes([rho1], [rho2])
    return TWO_PI_I * rho1 ** k / (rho1 - rho2)


def trace_kernel4(lam1: complex, lam2: complex, rho1: complex, rho2: complex, k: int) -> complex:
    """
    2 i pi A_k with the pole-free closed forms
    A_0 = (rho2 - rho1 + lam2 - lam1)/Den, A_1 = (lam2 rho2 - lam1 rho1)/Den,
    Den = (lam1 - lam2)(lam1 - rho2)(rho1 - lam2)(rho1 - rho2).
    """
    if k not in (0, 1):
        raise ValidationError(f"trace_kernel4 takes k in {{0, 1}}, got {k}", {"k": k})
    lam1, lam2, rho1, rho2 = (complex(v) for v in (lam1, lam2, rho1, rho2))
    _check_half_planes([lam1, rho1], [lam2, rho2])
    den = (lam1 - lam2) * (lam1 - rho2) * (rho1 - lam2) * (rho1 - rho2)
    numerator = (rho2 - rho1 + lam2 - lam1) if k == 0 else (lam2 * rho2 - lam1 * rho1)
    return TWO_PI_I * numerator / den


def kernel_quadrature(upper: Sequence[complex], lower: Sequence[complex], k: int = 0,
                      epsrel: float = 1e-12) -> complex:
    """
    Adaptive quadrature of the real-line integral of xi^k / prod(xi - p) taken as the
    x_n -> 0+ limit: the symmetric principal value plus i pi c_{-1}, where c_{-1} is the
    coefficient of the 1/xi tail (1 when k = #poles - 1, else 0).
    """
    poles = [complex(p) for p in upper] + [complex(p) for p in lower]
    if k > len(poles) - 1:
        raise ValidationError("Integrand does not decay", {"k": k, "poles": len(poles)})

    def f(xi):
        value = xi ** k
        for p in poles:
            value = value / (xi - p)
        return value

    def even(xi):
        return f(xi) + f(-xi)

    breakpoints = sorted({abs(p.real) for p in poles})
    cut = 2.0 * max(abs(p) for p in poles) + 1.0
    total = 0j
    for part in (np.real, np.imag):
        head, _ = integrate.quad(lambda t: part(even(t)), 0.0, cut, points=breakpoints or None,
                                 limit=500, epsabs=1e-15, epsrel=epsrel)
        tail, _ = integrate.quad(lambda t: part(even(t)), cut, np.inf, limit=500, epsabs=1e-15, epsrel=epsrel)
        total += (head + tail) * (1j if part is np.imag else 1.0)
    tail_coefficient = 1.0 if k == len(poles) - 1 else 0.0
    return total + 1j * np.pi * tail_coefficient


@dataclass(frozen=True)
class TraceSymbolSystem:
    """
    Principal-symbol system on (gamma0, gamma1):
        gamma0 + rho2 gamma1 = g2
        (rho2 - rho1 + lam2 - lam1) gamma0 + (lam2 rho2 - lam1 rho1) gamma1 = g6
    Eliminating gamma0 leaves (rho2 - rho1)(lam1 - rho2) gamma1 = g7.
    """
    roots: SymbolRoots
    matrix: np.ndarray
    determinant: complex
    reduced_symbol: complex

    @classmethod
    def from_roots(cls, roots: SymbolRoots) -> 'TraceSymbolSystem':
        r1, r2, l1, l2 = roots.rho1, roots.rho2, roots.lam1, roots.lam2
        matrix = np.array([[1.0, r2], [r2 - r1 + l2 - l1, l2 * r2 - l1 * r1]], dtype=complex)
        determinant = complex(matrix[0, 0] * matrix[1, 1] - matrix[0, 1] * matrix[1, 0])
        return cls(roots, matrix, determinant, complex((r2 - r1) * (l1 - r2)))

    def eliminate(self, g2: complex, g6: complex) -> complex:
        """g7 = g6 - (rho2 - rho1 + lam2 - lam1) g2"""
        return complex(g6 - self.matrix[1, 0] * g2)

    def apply(self, gamma0: complex, gamma1: complex) -> Tuple[complex, complex]:
        g2, g6 = self.matrix @ np.array([gamma0, gamma1], dtype=complex)
        return complex(g2), complex(g6)


def boundary_trace_solve(roots: SymbolRoots, g2_slot: complex, g7_slot: complex) -> Tuple[complex, complex]:
    """gamma1 = g7 / ((rho2 - rho1)(lam1 - rho2)), gamma0 = g2 - rho2 gamma1"""
    symbol = (roots.rho2 - roots.rho1) * (roots.lam1 - roots.rho2)
    threshold = ELLIPTICITY_THRESHOLD * (1.0 + abs(roots.R))
    if abs(symbol) < threshold:
        raise NotElliptic(f"Reduced boundary symbol {abs(symbol):.3e} below {threshold:.3e}",
                          {"symbol": abs(symbol), "threshold": threshold})
    gamma1 = complex(g7_slot) / symbol
    gamma0 = complex(g2_slot) - roots.rho2 * gamma1
    return gamma1, gamma0


def ellipticity_margin(problem, mu: complex, xi_grid: Sequence[float]) -> float:
    """min over boundary samples and xi' of |(rho2 - rho1)(lam1 - rho2)| / <xi'>^2"""
    xi_grid = np.atleast_1d(np.asarray(xi_grid, dtype=float))
    if xi_grid.size == 0:
        raise ValidationError("Tangential frequency grid is empty", {"field": "xi_grid"})
    boundary = problem.geometry.boundary_sample()
    a_vals = 1.0 / np.atleast_1d(problem.index.principal(*boundary))
    margin = np.inf
    for a_val in np.unique(np.round(a_vals, 14)):
        for xi in xi_grid:
            R_val = float(xi * xi)
            roots = SymbolRoots.at(a_val, R_val, mu)
            value = abs((roots.rho2 - roots.rho1) * (roots.lam1 - roots.rho2)) / (1.0 + R_val)
            margin = min(margin, value)
    logger.debug(f"Ellipticity margin at mu={mu}: {margin:.6g}")
    return float(margin)


def random_admissible_point(rng: np.random.Generator, R_max: float = 10.0,
                            min_imag: float = 1e-3) -> Tuple[complex, float, complex]:
    """Draw (a, R, mu) with both characteristic polynomials elliptic"""
    while True:
        R_val = float(rng.uniform(0.0, R_max))
        a_val = complex(rng.uniform(0.2, 2.0), rng.uniform(-1.0, 1.0))
        mu = complex(np.exp(1j * rng.uniform(0.0, 2.0 * np.pi)))
        outer = cmath.sqrt(mu - R_val)
        inner = cmath.sqrt(mu / a_val - R_val)
        if abs(outer.imag) > min_imag and abs(inner.imag) > min_imag:
            return a_val, R_val, mu


def random_root_tuple(rng: np.random.Generator, near_confluent: bool = False,
                      min_imag: float = 0.1) -> Tuple[complex, complex, complex, complex]:
    """(lam1, lam2, rho1, rho2) in the half planes the kernels assume"""
    def upper():
        return complex(rng.uniform(-3.0, 3.0), rng.uniform(min_imag, 3.0))

    def lower():
        return complex(rng.uniform(-3.0, 3.0), -rng.uniform(min_imag, 3.0))

    rho1, rho2 = upper(), lower()
    if near_confluent:
        eps = 10.0 ** rng.uniform(-7, -4)
        lam1 = rho1 * (1.0 + eps)
        lam2 = rho2 * (1.0 + eps)
    else:
        lam1, lam2 = upper(), lower()
    return lam1, lam2, rho1, rho2
