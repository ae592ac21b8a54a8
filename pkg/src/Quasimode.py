import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import numpy.polynomial.polynomial as P
from numpy.polynomial import Chebyshev, Polynomial
from scipy.integrate import simpson

from src.Discretize import assemble_interval
from src.Exceptions import NearSingular, NoDecayingBranch, SignConditionFails, SupportLeaksBoundary, ValidationError
from src.ITEConfig import SolverSettings
from src.Problem import Interval, RefractionIndex, TransmissionProblem, check_problem
from src.Resolvent import weighted_resolvent_norm
from utils.ParallelUtils import ParallelUtils

logger = logging.getLogger("itespec")

MAX_ORDER = 4
PHASE_EXTRA_DEGREE = 16
SIGN_TOLERANCE = 1e-10
LEAK_TOLERANCE = 1e-6
WINDOW_WIDTHS = 12.0
QUADRATURE_POINTS = 4001
TURNING_FRACTION = 0.9
NODES_PER_OSCILLATION = 1.5
RESOLUTION_TOLERANCE = 0.1


# POWER SERIES (coefficient arrays, lowest degree first, truncated at a fixed length)
def _truncate(c: np.ndarray, length: int) -> np.ndarray:
    out = np.zeros(length, dtype=complex)
    c = np.asarray(c, dtype=complex)[:length]
    out[:c.size] = c
    return out


def series_sqrt(c: np.ndarray, root0: complex, length: int) -> np.ndarray:
    """psi with psi^2 = c and psi_0 = root0"""
    c = _truncate(c, length)
    psi = np.zeros(length, dtype=complex)
    psi[0] = root0
    for k in range(1, length):
        cross = np.sum(psi[1:k] * psi[k - 1:0:-1])
        psi[k] = (c[k] - cross) / (2.0 * psi[0])
    return psi


def series_power(a: np.ndarray, alpha: float, length: int) -> np.ndarray:
    """a^alpha by b_n = (1/(n a_0)) sum_{k=1}^{n} ((alpha+1)k - n) a_k b_{n-k}"""
    a = _truncate(a, length)
    b = np.zeros(length, dtype=complex)
    b[0] = a[0] ** alpha
    for n in range(1, length):
        k = np.arange(1, n + 1)
        b[n] = np.sum(((alpha + 1.0) * k - n) * a[k] * b[n - k]) / (n * a[0])
    return b


def series_mul(a: np.ndarray, b: np.ndarray, length: int) -> np.ndarray:
    return _truncate(P.polymul(a, b), length)


# QUASIMODE
@dataclass
class Quasimode:
    """1D WKB beam u(h) = h^(-1/4) A(y; h) exp(i phi(y)/h), y = x - x0"""
    x0: float
    xi0: float
    z: complex
    Q_phase: complex
    order: int
    phase_derivative: np.ndarray
    amplitude_terms: List[np.ndarray]
    potential_coeffs: np.ndarray
    V_eval: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    conjugated: bool = False
    window: float = 1.0
    h_grid: List[float] = field(default_factory=list)
    residual_ratios: List[float] = field(default_factory=list)
    slope: Optional[float] = None
    mass_decay: Optional[float] = None
    monotone: bool = True

    def potential(self, x) -> np.ndarray:
        values = np.asarray(self.V_eval(np.asarray(x, dtype=float)), dtype=complex) * np.ones(np.shape(x))
        return np.conj(values) if self.conjugated else values

    def width(self, h: float) -> float:
        return float(np.sqrt(h / self.Q_phase.imag))

    def phase(self, y: np.ndarray) -> np.ndarray:
        return P.polyval(y, P.polyint(self.phase_derivative))

    def amplitude(self, h: float, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        coeffs = sum(h ** j * a for j, a in enumerate(self.amplitude_terms))
        return P.polyval(y, coeffs), P.polyval(y, P.polyder(coeffs)), P.polyval(y, P.polyder(coeffs, 2))

    def evaluate(self, h: float, x: np.ndarray) -> np.ndarray:
        y = np.asarray(x, dtype=float) - self.x0
        A, _, _ = self.amplitude(h, y)
        return h ** -0.25 * A * np.exp(1j * self.phase(y) / h)

    def _conjugated_residual(self, h: float, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(A, e^{-i phi/h}(-h^2 d^2 + V - z)(A e^{i phi/h}))"""
        psi = P.polyval(y, self.phase_derivative)
        dpsi = P.polyval(y, P.polyder(self.phase_derivative))
        A, dA, d2A = self.amplitude(h, y)
        eikonal = psi ** 2 + self.potential(self.x0 + y) - self.z
        return A, eikonal * A - 1j * h * (2.0 * psi * dA + dpsi * A) - h * h * d2A

    def residual_ratio(self, h: float) -> float:
        """||(-h^2 d^2 + V - z) u|| / ||u|| on |y| <= min(window, 12 widths)"""
        Y = min(self.window, WINDOW_WIDTHS * self.width(h))
        y = np.linspace(-Y, Y, QUADRATURE_POINTS)
        A, r = self._conjugated_residual(h, y)
        envelope = np.exp(-self.phase(y).imag / h)
        top = simpson(np.abs(r * envelope) ** 2, x=y)
        bottom = simpson(np.abs(A * envelope) ** 2, x=y)
        return float(np.sqrt(top / bottom))

    def log_mass_outside(self, h: float, r0: float) -> float:
        """log of the fraction of ||u||^2 on r0 <= |y| <= window"""
        y = np.linspace(-self.window, self.window, 2 * QUADRATURE_POINTS + 1)
        A, _, _ = self.amplitude(h, y)
        log_density = 2.0 * np.log(np.abs(A) + 1e-300) - 2.0 * self.phase(y).imag / h
        outside = np.abs(y) >= r0
        peak = float(np.max(log_density))
        peak_out = float(np.max(log_density[outside]))
        total = simpson(np.exp(log_density - peak), x=y)
        out = simpson(np.where(outside, np.exp(log_density - peak_out), 0.0), x=y)
        return float(np.log(max(out, 1e-300)) + peak_out - np.log(total) - peak)

    def to_dict(self) -> Dict:
        return {"x0": self.x0, "xi0": self.xi0, "z": [self.z.real, self.z.imag],
                "Q_phase": [self.Q_phase.real, self.Q_phase.imag], "order": self.order,
                "conjugated": self.conjugated, "window": self.window, "slope": self.slope,
                "mass_decay": self.mass_decay, "monotone": self.monotone,
                "rows": [{"h": h, "residual_ratio": r} for h, r in zip(self.h_grid, self.residual_ratios)]}


def _potential_series(V_eval: Callable, x0: float, radius: float, degree: int) -> np.ndarray:
    """Power-series coefficients of V in y = x - x0 from a trimmed Chebyshev interpolant"""
    cheb = Chebyshev.interpolate(lambda x: np.asarray(V_eval(x), dtype=complex) * np.ones_like(x),
                                 degree, domain=[x0 - radius, x0 + radius])
    cheb = cheb.trim(1e-14 * max(1.0, float(np.max(np.abs(cheb.coef)))))
    power = cheb.convert(kind=Polynomial, domain=[x0 - radius, x0 + radius], window=[-radius, radius])
    return np.asarray(power.coef, dtype=complex)


def _turning_distance(c: np.ndarray) -> float:
    """Distance from y = 0 to the nearest zero of z - V in the series model"""
    c = np.trim_zeros(np.asarray(c, dtype=complex), "b")
    if c.size <= 1:
        return np.inf
    roots = P.polyroots(c)
    return float(np.min(np.abs(roots))) if roots.size else np.inf


def _fit_slope(xs: Sequence[float], ys: Sequence[float]) -> Optional[float]:
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    ok = np.isfinite(ys)
    if np.sum(ok) < 2:
        return None
    return float(np.polyfit(xs[ok], ys[ok], 1)[0])


def build_quasimode(V_eval: Callable[[np.ndarray], np.ndarray], x0: float, xi0: float, order: int,
                    h_grid: Sequence[float], fit_radius: float = 2.0,
                    domain: Optional[Tuple[float, float]] = None) -> Quasimode:
    """
    Beam for -h^2 d^2 + V - z at (x0, xi0), z = xi0^2 + V(x0), with the exact complex eikonal
    psi^2 = z - V expanded to degree 2K + 16 and transport amplitudes a_0..a_K.
    Residual ratios, their log-log slope and the mass-decay constant are filled per h.
    """
    if not 0 <= order <= MAX_ORDER:
        raise ValidationError(f"Quasimode order must lie in [0, {MAX_ORDER}]", {"order": order})
    if xi0 == 0:
        raise NoDecayingBranch("xi0 = 0 leaves the eikonal without a nondegenerate branch", {"xi0": xi0})
    h_grid = sorted((float(h) for h in h_grid), reverse=True)
    length = 2 * order + PHASE_EXTRA_DEGREE + 1

    V_coeffs = _truncate(_potential_series(V_eval, x0, fit_radius, length + 4), length)
    sign_value = float(np.imag(xi0 * V_coeffs[1]))
    if abs(sign_value) < SIGN_TOLERANCE:
        raise SignConditionFails(f"Im(xi0 V'(x0)) = {sign_value:.3e} vanishes", {"value": sign_value, "x0": x0})

    # decaying beams need Im psi'(x0) = Im(-V'(x0)/(2 xi0)) > 0, otherwise work with conj(V)
    conjugated = np.imag(-V_coeffs[1] / (2.0 * xi0)) < 0
    if conjugated:
        V_coeffs = np.conj(V_coeffs)
    z = complex(xi0 ** 2 + V_coeffs[0])
    c = -V_coeffs.copy()
    c[0] += z
    psi = series_sqrt(c, complex(xi0), length)
    Q = complex(psi[1])
    if Q.imag <= 0:
        raise NoDecayingBranch(f"No branch with Im Q > 0 (Q = {Q})", {"Q": [Q.real, Q.imag]})

    amplitudes = [series_power(psi, -0.5, length)]
    inv_sqrt = amplitudes[0]
    for _ in range(order):
        integrand = series_mul(0.5j * P.polyder(amplitudes[-1], 2), inv_sqrt, length)
        amplitudes.append(series_mul(inv_sqrt, P.polyint(integrand), length))

    window = min(TURNING_FRACTION * _turning_distance(c), fit_radius)
    if domain is not None:
        window = min(window, x0 - domain[0], domain[1] - x0)
    qm = Quasimode(float(x0), float(xi0), z, Q, int(order), psi, amplitudes, V_coeffs, V_eval,
                   bool(conjugated), float(window))
    if conjugated:
        logger.info("Beam built for conj(V); the adjoint has the same resolvent norm")

    if domain is not None and h_grid:
        gap = min(x0 - domain[0], domain[1] - x0)
        if gap < 5.0 * qm.width(h_grid[0]):
            raise SupportLeaksBoundary(f"x0 is {gap:.3g} from the boundary, under 5 beam widths",
                                       {"gap": gap, "width": qm.width(h_grid[0])})

    qm.h_grid = h_grid
    qm.residual_ratios = [qm.residual_ratio(h) for h in h_grid]
    if len(h_grid) >= 2:
        qm.slope = _fit_slope(np.log(h_grid), np.log(qm.residual_ratios))
        qm.monotone = _is_monotone(qm.residual_ratios)
        r0 = 3.0 * qm.width(h_grid[0])
        if r0 < qm.window:
            decay = _fit_slope(1.0 / np.asarray(h_grid), [qm.log_mass_outside(h, r0) for h in h_grid])
            qm.mass_decay = None if decay is None else -decay
    logger.info(f"Quasimode K={order}: slope {qm.slope}, mass decay {qm.mass_decay}")
    return qm


def _is_monotone(ratios: Sequence[float]) -> bool:
    """Decreasing as h decreases; the first two steps may rise by 5%"""
    for i in range(1, len(ratios)):
        allowance = 1.05 if i <= 2 else 1.0 + 1e-12
        if ratios[i] > ratios[i - 1] * allowance:
            return False
    return True


def bound_growth_slopes(quasimodes: Sequence[Quasimode]) -> Dict[int, Optional[float]]:
    """Slope of log(h^2 / ratio) against log(1/h) per order"""
    slopes = {}
    for qm in quasimodes:
        bounds = [h * h / r for h, r in zip(qm.h_grid, qm.residual_ratios)]
        slopes[qm.order] = _fit_slope(-np.log(qm.h_grid), np.log(bounds))
    return slopes


# LOWER BOUNDS
def index_for_quasimode(qm: Quasimode, scale: float) -> Callable[[np.ndarray], np.ndarray]:
    """n(x) = (z - V(x)) / scale, so that u(h) is a quasimode of d^2 + k^2 n at k = sqrt(scale)/h"""
    return lambda x: (qm.z - qm.potential(x)) / scale


@dataclass
class LowerBoundRecord:
    h: float
    k: float
    nodes: int
    residual_ratio: float
    discrete_residual_ratio: float
    lower_bound: float
    discrete_lower_bound: float
    scan_value: float
    verified: bool
    consistent: bool

    def to_dict(self) -> Dict:
        return {"h": self.h, "k": self.k, "nodes": self.nodes, "residual_ratio": self.residual_ratio,
                "discrete_residual_ratio": self.discrete_residual_ratio, "lower_bound": self.lower_bound,
                "discrete_lower_bound": self.discrete_lower_bound, "scan_value": self.scan_value,
                "verified": self.verified, "consistent": self.consistent}


def quasimode_problem(qm: Quasimode, domain: Tuple[float, float], scale: float,
                      collar_width: float = 0.2) -> TransmissionProblem:
    index = RefractionIndex("fixed", index_for_quasimode(qm, scale),
                            expressions={"n": f"(z - V(x))/{scale}"})
    return check_problem(TransmissionProblem(Interval(float(domain[0]), float(domain[1])), index, collar_width))


def nodes_for_beam(qm: Quasimode, domain: Tuple[float, float], h: float, minimum: int) -> int:
    """Chebyshev nodes that resolve the beam oscillation xi0/h across the domain"""
    half_length = 0.5 * (domain[1] - domain[0])
    return max(int(minimum), int(np.ceil(NODES_PER_OSCILLATION * abs(qm.xi0) * half_length / h)))


def quasimode_lower_bound(qm: Quasimode, domain: Tuple[float, float], N: int, h_grid: Sequence[float],
                          scale: float = 4.0, collar_width: float = 0.2,
                          settings: Optional[SolverSettings] = None) -> List[LowerBoundRecord]:
    """
    Per h, with k = sqrt(scale)/h the w-block of R~ is -(1/h^2)(-h^2 d^2 + V - z), so the beam gives
    ||R~|| >= h^2 / residual ratio. That bound is compared with the discrete norm on at least N nodes,
    raised until the beam is resolved. A record is verified when the discrete residual ratio of the
    sampled beam agrees with the continuous one and the discrete norm is finite; it is consistent when
    it is verified and the bound stays below the discrete norm.
    """
    settings = settings or SolverSettings()
    problem = quasimode_problem(qm, domain, scale, collar_width)

    def one(h):
        h = float(h)
        opr = assemble_interval(problem, "tilde", nodes_for_beam(qm, domain, h, N))
        sw = np.sqrt(np.concatenate([opr.weights, opr.weights]))
        interior = opr.interior_rows
        u = qm.evaluate(h, opr.nodes)
        peak = float(np.max(np.abs(u)))
        edge = max(abs(u[0]), abs(u[-1]))
        if edge > LEAK_TOLERANCE * peak:
            raise SupportLeaksBoundary(f"Beam reaches the boundary: {edge / peak:.3e} of its peak at h={h}",
                                       {"h": h, "relative_edge": edge / peak})
        k = float(np.sqrt(scale) / h)
        A = opr.matrix_of(k)
        r = (A @ np.concatenate([u, np.zeros_like(u)]))[interior]
        r_norm = float(np.linalg.norm(sw[interior] * r))
        u_norm = float(np.linalg.norm(sw[:opr.N] * u))
        x = np.linalg.solve(A, opr.interior_selector() @ r)
        discrete = float(np.linalg.norm(sw * x) / r_norm)
        try:
            # conditioning is not capped here: a nearly singular T only raises the norm
            scan = weighted_resolvent_norm(opr, k, np.inf)
        except (NearSingular, np.linalg.LinAlgError, ValueError):
            scan = np.inf

        ratio = qm.residual_ratio(h)
        discrete_ratio = h * h * r_norm / u_norm
        lower = h * h / ratio
        resolved = abs(discrete_ratio / ratio - 1.0) <= RESOLUTION_TOLERANCE
        verified = bool(resolved and np.isfinite(scan))
        consistent = bool(verified and lower <= scan * (1.0 + RESOLUTION_TOLERANCE))
        if not verified:
            logger.warning(f"Lower bound at h={h} not verified: discrete/continuous residual "
                           f"{discrete_ratio / ratio:.3g}, scan {scan:.3e}")
        return LowerBoundRecord(h, k, opr.N, ratio, discrete_ratio, lower, discrete, scan, verified, consistent)

    records = ParallelUtils.map(one, list(h_grid), settings.threads)
    logger.info(f"Lower bounds at {len(records)} h values, all consistent: {all(r.consistent for r in records)}")
    return records
