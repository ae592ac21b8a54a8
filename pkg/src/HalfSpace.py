import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as spl

from src.Exceptions import (BoundarySystemMismatch, DegenerateCompanionMatrix, FitUnstable, NonDecayingData,
                            ValidationError)
from src.Symbols import (SymbolRoots, TraceSymbolSystem, boundary_trace_solve, residue_sum,
                         trace_kernel2, trace_kernel4, TWO_PI_I)
from utils.ParallelUtils import ParallelUtils

logger = logging.getLogger("itespec")

COLLISION_TOLERANCE = 1e-10
FIT_RESIDUAL_LIMIT = 0.5
H_WINDOW = (2.0 ** -12, 2.0 ** -4)
MIN_FIT_POINTS = 5
ROW_CHECK_TOLERANCE = 1e-8


@dataclass(frozen=True)
class ExponentialProfile:
    """sum_j c_j exp(-beta_j x_n) with Re beta_j > 0"""
    coefficients: Tuple[complex, ...] = ()
    rates: Tuple[complex, ...] = ()

    def __post_init__(self):
        if len(self.coefficients) != len(self.rates):
            raise ValidationError("Profile needs one rate per coefficient",
                                  {"coefficients": len(self.coefficients), "rates": len(self.rates)})
        for beta in self.rates:
            if complex(beta).real <= 0:
                raise NonDecayingData(f"Data rate {beta} does not decay", {"rate": [complex(beta).real, complex(beta).imag]})

    @classmethod
    def from_pairs(cls, pairs: Sequence[Sequence[complex]]) -> 'ExponentialProfile':
        pairs = list(pairs or [])
        return cls(tuple(complex(c) for c, _ in pairs), tuple(complex(b) for _, b in pairs))

    @property
    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coefficients)

    def scaled(self, factor: complex) -> 'ExponentialProfile':
        return ExponentialProfile(tuple(factor * c for c in self.coefficients), self.rates)

    def frequencies(self, h: float) -> List[complex]:
        """sigma_j = i h beta_j, so exp(-beta x) = exp(i sigma x / h)"""
        return [1j * h * complex(beta) for beta in self.rates]

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=complex)
        for c, beta in zip(self.coefficients, self.rates):
            out += c * np.exp(-beta * x)
        return out


@dataclass(frozen=True)
class HalfSpaceInstance:
    """
    Constant-coefficient model on x_n > 0 with D = (h/i) d/dx_n:
        (a(D^2 + R) - mu) u - h^2 V v = h^2 f,   (D^2 + R - mu) v = h^2 g,
    u(0) = Du(0) = 0, decay at infinity, R = |xi'|^2.
    """
    a_val: complex
    V_val: complex
    mu: complex
    xi_prime: float
    h: float
    f_profile: ExponentialProfile = field(default_factory=ExponentialProfile)
    g_profile: ExponentialProfile = field(default_factory=ExponentialProfile)
    name: str = "instance"

    @property
    def R(self) -> float:
        return float(self.xi_prime) ** 2

    def roots(self) -> SymbolRoots:
        return SymbolRoots.at(self.a_val, self.R, self.mu)

    def with_h(self, h: float) -> 'HalfSpaceInstance':
        return replace(self, h=float(h))

    def scaled(self, factor: complex) -> 'HalfSpaceInstance':
        return replace(self, f_profile=self.f_profile.scaled(factor), g_profile=self.g_profile.scaled(factor))

    @classmethod
    def from_problem(cls, problem, mu: complex, xi_prime: float, h: float,
                     f_profile: Optional[ExponentialProfile] = None,
                     g_profile: Optional[ExponentialProfile] = None,
                     boundary_point: int = 0) -> 'HalfSpaceInstance':
        """Frozen-coefficient model at one boundary sample of a problem"""
        boundary = problem.geometry.boundary_sample()
        coords = tuple(np.atleast_1d(c)[boundary_point:boundary_point + 1] for c in boundary)
        n1 = complex(np.atleast_1d(problem.index.principal(*coords))[0])
        return cls(1.0 / n1, (n1 - 1.0) / n1, complex(mu), float(xi_prime), float(h),
                   f_profile or ExponentialProfile(), g_profile or ExponentialProfile(),
                   name=f"{problem.geometry.kind}@{boundary_point}")

    @classmethod
    def from_config(cls, block: Dict, h: float = 2.0 ** -6) -> 'HalfSpaceInstance':
        from src.ITEConfig import as_complex
        return cls(as_complex(block.get("a", 0.25)), as_complex(block.get("V", 0.75)), as_complex(block["mu"]),
                   float(block.get("xi_prime", 0.0)), float(h),
                   ExponentialProfile.from_pairs([(as_complex(c), as_complex(b)) for c, b in block.get("f", [])]),
                   ExponentialProfile.from_pairs([(as_complex(c), as_complex(b)) for c, b in block.get("g", [])]),
                   name=block.get("name", "instance"))


def companion_matrix(inst: HalfSpaceInstance) -> np.ndarray:
    """D y = M y + F for y = (u/V, D(u/V), v, Dv)"""
    a, mu, R, h = complex(inst.a_val), complex(inst.mu), inst.R, inst.h
    return np.array([
        [0, 1, 0, 0],
        [mu / a - R, 0, h * h / a, 0],
        [0, 0, 0, 1],
        [0, 0, mu - R, 0],
    ], dtype=complex)


def _forcing_vectors(inst: HalfSpaceInstance) -> List[Tuple[complex, np.ndarray]]:
    """(sigma_j, F_j) for every data exponential"""
    h, a, V = inst.h, complex(inst.a_val), complex(inst.V_val)
    out = []
    for c, sigma in zip(inst.f_profile.coefficients, inst.f_profile.frequencies(h)):
        if c == 0:
            continue
        if V == 0:
            raise ValidationError("f data needs V != 0 (u enters through u/V)", {"V": 0})
        out.append((sigma, np.array([0, h * h * c / (a * V), 0, 0], dtype=complex)))
    for c, sigma in zip(inst.g_profile.coefficients, inst.g_profile.frequencies(h)):
        if c == 0:
            continue
        out.append((sigma, np.array([0, 0, 0, h * h * c], dtype=complex)))
    return out


@dataclass
class HalfSpaceSolution:
    """y(x) = sum_j Y_j e^{i s_j x/h} over particular parts and decaying modes"""
    inst: HalfSpaceInstance
    exponents: np.ndarray
    vectors: np.ndarray  # columns

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        phases = np.exp(1j * np.outer(self.exponents, x) / self.inst.h)
        return self.vectors @ phases

    def derivative(self, x: np.ndarray) -> np.ndarray:
        """D y = (h/i) y'"""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        phases = np.exp(1j * np.outer(self.exponents, x) / self.inst.h)
        return (self.vectors * self.exponents[None, :]) @ phases

    def forcing(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        F = np.zeros((4, x.size), dtype=complex)
        for sigma, vec in _forcing_vectors(self.inst):
            F += np.outer(vec, np.exp(1j * sigma * x / self.inst.h))
        return F

    def ode_residual(self, x: np.ndarray) -> float:
        """max |Dy - My - F| relative to max |Dy|"""
        M = companion_matrix(self.inst)
        Dy = self.derivative(x)
        res = Dy - M @ self.evaluate(x) - self.forcing(x)
        scale = max(float(np.max(np.abs(Dy))), 1e-300)
        return float(np.max(np.abs(res))) / scale

    def boundary_values(self) -> Tuple[complex, complex]:
        y0 = self.evaluate(np.array([0.0]))[:, 0]
        return complex(y0[0]), complex(y0[1])

    def traces(self) -> Tuple[complex, complex]:
        """(gamma0, gamma1) = (Dv(0), v(0))"""
        y0 = self.evaluate(np.array([0.0]))[:, 0]
        return complex(y0[3]), complex(y0[2])


def exact_halfspace_solution(inst: HalfSpaceInstance) -> HalfSpaceSolution:
    inst.roots()  # ellipticity of both characteristic polynomials
    M = companion_matrix(inst)
    eigvals, eigvecs = spl.eig(M)
    gaps = np.abs(eigvals[:, None] - eigvals[None, :]) + np.eye(4) * np.inf
    if np.min(gaps) < COLLISION_TOLERANCE:
        raise DegenerateCompanionMatrix(f"Companion eigenvalues collide (gap {np.min(gaps):.3e})",
                                        {"gap": float(np.min(gaps)), "a": [complex(inst.a_val).real, complex(inst.a_val).imag]})
    decaying = np.where(eigvals.imag > 0)[0]
    if decaying.size != 2:
        raise DegenerateCompanionMatrix(f"Expected two decaying modes, found {decaying.size}",
                                        {"eigenvalues": [[e.real, e.imag] for e in eigvals]})

    exponents, columns = [], []
    particular0 = np.zeros(4, dtype=complex)
    for sigma, F in _forcing_vectors(inst):
        distance = float(np.min(np.abs(eigvals - sigma)))
        if distance < COLLISION_TOLERANCE:
            raise DegenerateCompanionMatrix(f"Data frequency {sigma} meets a companion eigenvalue",
                                            {"distance": distance})
        Y = np.linalg.solve(sigma * np.eye(4) - M, F)
        exponents.append(sigma)
        columns.append(Y)
        particular0 += Y

    W = eigvecs[:, decaying]
    # clamp u/V and D(u/V) at the boundary
    alpha = np.linalg.solve(W[:2, :], -particular0[:2])
    for idx, coef in zip(decaying, alpha):
        exponents.append(eigvals[idx])
        columns.append(coef * eigvecs[:, idx])

    if not columns:
        return HalfSpaceSolution(inst, np.zeros(0, dtype=complex), np.zeros((4, 0), dtype=complex))
    return HalfSpaceSolution(inst, np.array(exponents, dtype=complex), np.array(columns, dtype=complex).T)


def exact_halfspace_traces(inst: HalfSpaceInstance) -> Tuple[complex, complex]:
    """Exact (gamma0, gamma1) from the companion solve"""
    return exact_halfspace_solution(inst).traces()


@dataclass(frozen=True)
class TraceSlots:
    g2: complex
    g4: complex
    g6: complex
    g7: complex


def trace_slots(inst: HalfSpaceInstance, freeze_data: bool = True) -> TraceSlots:
    """
    Right-hand-side slots of the boundary system built from the data.
    freeze_data evaluates the data kernels at frequency 0 (principal level);
    otherwise the exact frequencies i h beta_j are kept and the slots are exact.
    """
    roots = inst.roots()
    r1, r2, l1, l2 = roots.rho1, roots.rho2, roots.lam1, roots.lam2
    h, a, V = inst.h, complex(inst.a_val), complex(inst.V_val)

    def frequencies(profile: ExponentialProfile) -> List[complex]:
        return [0j] * len(profile.rates) if freeze_data else profile.frequencies(h)

    g1 = 0j
    g4 = 0j
    for c, sigma in zip(inst.g_profile.coefficients, frequencies(inst.g_profile)):
        g1 += h * h * c * residue_sum([sigma, r1], [r2])
        g4 -= h * h * c * residue_sum([sigma, r1, l1], [r2, l2]) / a
    for c, sigma in zip(inst.f_profile.coefficients, frequencies(inst.f_profile)):
        if c == 0:
            continue
        g4 -= c * residue_sum([sigma, l1], [l2]) / (a * V)
    g2 = (r2 - r1) * g1
    den = (l1 - l2) * (l1 - r2) * (r1 - l2) * (r1 - r2)
    g6 = a * den * g4
    system = TraceSymbolSystem.from_roots(roots)
    return TraceSlots(complex(g2), complex(g4), complex(g6), system.eliminate(g2, g6))


def boundary_rows(roots: SymbolRoots) -> np.ndarray:
    """The two rows of the principal system, rebuilt from the contour kernels"""
    tk2 = [trace_kernel2(roots.rho1, roots.rho2, k) for k in (0, 1)]
    row_v = np.array([tk2[0], tk2[1] - TWO_PI_I]) / TWO_PI_I * (roots.rho1 - roots.rho2)
    den = ((roots.lam1 - roots.lam2) * (roots.lam1 - roots.rho2)
           * (roots.rho1 - roots.lam2) * (roots.rho1 - roots.rho2))
    row_u = np.array([trace_kernel4(roots.lam1, roots.lam2, roots.rho1, roots.rho2, k) for k in (0, 1)]) / TWO_PI_I * den
    return np.vstack([row_v, row_u])


def symbol_predicted_traces(inst: HalfSpaceInstance, freeze_data: bool = True) -> Tuple[complex, complex]:
    """(gamma0, gamma1) from the reduced boundary symbol"""
    slots = trace_slots(inst, freeze_data)
    roots = inst.roots()
    gamma1, gamma0 = boundary_trace_solve(roots, slots.g2, slots.g7)
    # the eliminated solve must still satisfy both rows built from the contour kernels
    rows, traces, rhs = boundary_rows(roots), np.array([gamma0, gamma1]), np.array([slots.g2, slots.g6])
    defect = np.abs(rows @ traces - rhs)
    scale = 1.0 + np.abs(rhs) + np.abs(rows) @ np.abs(traces)
    if np.any(defect > ROW_CHECK_TOLERANCE * scale):
        raise BoundarySystemMismatch(f"Boundary row defect {float(np.max(defect)):.3e} for {inst.name}",
                                     {"defect": [float(d) for d in defect], "name": inst.name})
    return gamma0, gamma1


@dataclass
class ConvergenceFit:
    name: str
    rows: List[Tuple[float, float, float]]
    slope0: Optional[float]
    slope1: Optional[float]
    residual: float
    exact_match: bool = False

    def to_dict(self) -> Dict:
        return {"name": self.name, "slope0": self.slope0, "slope1": self.slope1,
                "residual": self.residual, "exact_match": self.exact_match}


def _check_h_grid(h_grid: Sequence[float]) -> List[float]:
    h_grid = sorted(float(h) for h in h_grid)
    for h in h_grid:
        exponent = np.log2(h)
        if abs(exponent - round(exponent)) > 1e-9 or not (H_WINDOW[0] * (1 - 1e-12) <= h <= H_WINDOW[1] * (1 + 1e-12)):
            raise ValidationError(f"h = {h} is not a dyadic point of [2^-12, 2^-4]", {"h": h})
    if len(set(h_grid)) < MIN_FIT_POINTS:
        raise ValidationError(f"Need at least {MIN_FIT_POINTS} dyadic h values", {"count": len(set(h_grid))})
    return h_grid


def _loglog_fit(hs: np.ndarray, errs: np.ndarray) -> Tuple[Optional[float], float]:
    keep = errs > 0
    if keep.sum() < 3:
        return None, 0.0
    X = np.log(hs[keep])
    Y = np.log(errs[keep])
    slope, intercept = np.polyfit(X, Y, 1)
    residual = float(np.sqrt(np.mean((Y - (slope * X + intercept)) ** 2)))
    return float(slope), residual


def convergence_study(inst_family: Union[HalfSpaceInstance, Callable[[float], HalfSpaceInstance]],
                      h_grid: Sequence[float], threads: int = 1) -> ConvergenceFit:
    """Least-squares slopes of log|exact - predicted| against log h, per trace component"""
    h_grid = _check_h_grid(h_grid)
    build = inst_family.with_h if isinstance(inst_family, HalfSpaceInstance) else inst_family

    def one(h):
        inst = build(h)
        exact = exact_halfspace_traces(inst)
        predicted = symbol_predicted_traces(inst)
        return h, abs(exact[0] - predicted[0]), abs(exact[1] - predicted[1])

    rows = ParallelUtils.map(one, h_grid, threads)
    name = build(h_grid[0]).name
    hs = np.array([r[0] for r in rows])
    e0 = np.array([r[1] for r in rows])
    e1 = np.array([r[2] for r in rows])
    if np.all(e0 == 0) and np.all(e1 == 0):
        raise FitUnstable("Exact and predicted traces agree identically, nothing to fit",
                          {"exact_match": True, "name": name, "rows": rows})
    slope0, res0 = _loglog_fit(hs, e0)
    slope1, res1 = _loglog_fit(hs, e1)
    if slope0 is None and slope1 is None:
        raise FitUnstable("Too few nonzero differences to fit", {"name": name})
    residual = max(res0, res1)
    if residual > FIT_RESIDUAL_LIMIT:
        raise FitUnstable(f"Log-log fit residual {residual:.3f} above {FIT_RESIDUAL_LIMIT}",
                          {"residual": residual, "name": name})
    logger.info(f"Half-space {name}: slopes ({slope0}, {slope1}), residual {residual:.3g}")
    return ConvergenceFit(name, rows, slope0, slope1, residual)
