import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as spl

from src.Discretize import (DiscretizedOperator, SolutionPair, apply_resolvent, assemble, condition_number)
from src.Eigensolve import node_coords
from src.Exceptions import (EmptyOmega, GridTooFine, HypothesisViolated, NearSingular, SingularOnRealAxis,
                            ValidationError)
from src.ITEConfig import SolverSettings
from src.Problem import TransmissionProblem
from utils.ParallelUtils import ParallelUtils

logger = logging.getLogger("itespec")

NORMS_USED = "discrete surrogate: Clenshaw-Curtis weighted L2 (+) L2 on solutions, interior-row data"
REAL_AXIS_CEILING = 1e14
HYPOTHESIS_TOLERANCE = 1e-12
HYPOTHESIS_SAMPLES = 2000


def _scan_parameter(opr: DiscretizedOperator, k_squared: complex) -> complex:
    """Operator parameter for a point of the k^2 plane: principal k, or z = -k^2"""
    k_squared = complex(k_squared)
    return -k_squared if opr.parameter == "z" else complex(np.sqrt(k_squared))


def weighted_resolvent_norm(opr: DiscretizedOperator, param: complex,
                            ceiling: float = REAL_AXIS_CEILING) -> float:
    """sigma_max(W T^-1 E W_d^-1): solution weights on both blocks, data on interior rows"""
    A = opr.matrix_of(param)
    cond = condition_number(A)
    if not cond < ceiling:
        raise NearSingular(f"Condition number {cond:.3e} above {ceiling:.0e}",
                           {"condition": cond, "param": [complex(param).real, complex(param).imag]})
    sw = np.sqrt(np.concatenate([opr.weights, opr.weights]))
    interior = opr.interior_rows
    data = np.eye(opr.size, dtype=complex)[:, interior] / sw[interior]
    X = np.linalg.solve(A, data)
    return float(spl.svdvals(sw[:, None] * X)[0])


def resolvent_norm(opr: DiscretizedOperator, param: complex, settings: Optional[SolverSettings] = None) -> float:
    """Discrete ||R~|| (or ||R_z||) capped at the resolvent cap; near-singular points return the cap"""
    settings = settings or SolverSettings()
    try:
        value = weighted_resolvent_norm(opr, param, settings.condition_ceiling)
    except NearSingular:
        return settings.resolvent_cap
    return min(value, settings.resolvent_cap)


# PSEUDOSPECTRUM
@dataclass
class PseudospectrumField:
    re_axis: np.ndarray
    im_axis: np.ndarray
    values: np.ndarray
    form: str
    N: int
    mode: Optional[int] = None
    norms_used: str = NORMS_USED
    cap: float = 1e10

    def rows(self) -> List[Tuple[float, float, float]]:
        return [(float(x), float(y), float(self.values[i, j]))
                for i, x in enumerate(self.re_axis) for j, y in enumerate(self.im_axis)]

    def capped_nodes(self) -> List[complex]:
        idx = np.argwhere(self.values >= self.cap)
        return [complex(self.re_axis[i], self.im_axis[j]) for i, j in idx]

    def cross_check(self, eigen_k_squared: Sequence[complex], radius: float) -> bool:
        """Capped nodes only occur within radius of a reported eigenvalue"""
        return all(any(abs(node - e) <= radius for e in eigen_k_squared) for node in self.capped_nodes())

    def to_dict(self) -> Dict:
        return {"form": self.form, "N": self.N, "mode": self.mode, "norms_used": self.norms_used,
                "shape": list(self.values.shape), "max_value": float(np.max(self.values)),
                "min_value": float(np.min(self.values))}


def _scan_axes(region, resolution) -> Tuple[np.ndarray, np.ndarray]:
    (x0, x1), (y0, y1) = region
    if isinstance(resolution, dict):
        dx, dy = float(resolution["re_step"]), float(resolution["im_step"])
    else:
        dx = dy = float(resolution)
    nx = 1 if x1 == x0 else int(round((x1 - x0) / dx)) + 1
    ny = 1 if y1 == y0 else int(round((y1 - y0) / dy)) + 1
    return np.linspace(x0, x1, nx), np.linspace(y0, y1, ny)


def sigma_min_scan(problem: TransmissionProblem, form: str, region, resolution, N: int = 64,
                   mode: Optional[int] = None, settings: Optional[SolverSettings] = None) -> PseudospectrumField:
    """
    1/sigma_min in weighted norms at every node of a k^2-plane grid.
    region is ((re0, re1), (im0, im1)) in k^2; a zero-area region is a single-point scan.
    """
    settings = settings or SolverSettings()
    xs, ys = _scan_axes(region, resolution)
    if xs.size * ys.size > settings.max_grid_cells:
        raise GridTooFine(f"{xs.size * ys.size} scan nodes above budget {settings.max_grid_cells}",
                          {"nodes": int(xs.size * ys.size), "budget": settings.max_grid_cells})
    opr = assemble(problem, form, N, mode)
    points = [complex(x, y) for x in xs for y in ys]
    values = ParallelUtils.map(lambda p: resolvent_norm(opr, _scan_parameter(opr, p), settings), points,
                               settings.threads, settings.progress, "pseudospectrum")
    field_values = np.array(values, dtype=float).reshape(xs.size, ys.size)
    logger.info(f"Pseudospectrum scan: {len(points)} nodes, max {np.max(field_values):.3e}")
    return PseudospectrumField(xs, ys, field_values, form, N, mode, NORMS_USED, settings.resolvent_cap)


def doubling_stability(problem: TransmissionProblem, pseudo: PseudospectrumField, doubling_points: int,
                       rng: np.random.Generator, settings: Optional[SolverSettings] = None) -> Dict[str, object]:
    """Relative change of the scan value at random uncapped nodes when N doubles"""
    settings = settings or SolverSettings()
    candidates = np.argwhere(pseudo.values < 0.1 * pseudo.cap)
    if doubling_points <= 0 or candidates.size == 0:
        return {"points": [], "max_change": 0.0}
    pick = rng.choice(len(candidates), size=min(doubling_points, len(candidates)), replace=False)
    fine = assemble(problem, pseudo.form, 2 * pseudo.N, pseudo.mode)
    records = []
    for i, j in candidates[np.sort(pick)]:
        k_squared = complex(pseudo.re_axis[i], pseudo.im_axis[j])
        coarse_value = float(pseudo.values[i, j])
        fine_value = resolvent_norm(fine, _scan_parameter(fine, k_squared), settings)
        records.append({"k_squared": [k_squared.real, k_squared.imag], "coarse": coarse_value,
                        "fine": fine_value, "change": abs(fine_value - coarse_value) / coarse_value})
    return {"points": records, "max_change": max(r["change"] for r in records)}


# REAL-AXIS ENVELOPE
def check_sign_hypothesis(problem: TransmissionProblem) -> Dict[str, float]:
    """Im n >= 0 everywhere and Im n not identically zero (n2 for k-dependent indices)"""
    coords = problem.geometry.sample(HYPOTHESIS_SAMPLES)
    imag = np.atleast_1d(problem.index.imaginary_part(*coords)) * np.ones_like(coords[0])
    low, high = float(np.min(imag)), float(np.max(imag))
    if low < -HYPOTHESIS_TOLERANCE:
        raise HypothesisViolated(f"Im n takes the negative value {low:.3e}", {"min_imag": low})
    if high <= HYPOTHESIS_TOLERANCE:
        raise HypothesisViolated("Im n vanishes identically on the sampled domain", {"max_imag": high})
    return {"min_imag": low, "max_imag": high}


@dataclass
class BoundFit:
    k_grid: List[float]
    norms: List[float]
    envelope: List[float]
    C1: float
    C2: float
    residual: float
    max_violation: float
    hypothesis: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {"C1": self.C1, "C2": self.C2, "residual": self.residual, "max_violation": self.max_violation,
                "k_min": min(self.k_grid), "k_max": max(self.k_grid), "points": len(self.k_grid),
                "max_log_norm": float(np.max(np.log(self.norms))), "hypothesis": self.hypothesis,
                "norms_used": NORMS_USED}


def real_axis_bound_fit(problem: TransmissionProblem, k_grid: Sequence[float], N: int = 96,
                        settings: Optional[SolverSettings] = None) -> BoundFit:
    """
    log ||R~_{k^2}|| along real k, its running maximum, and an affine envelope C1 + C2 k
    fitted to the running maximum and lifted so that no sample lies above it.
    """
    settings = settings or SolverSettings()
    k_grid = [float(k) for k in k_grid]
    if not k_grid or min(k_grid) < 1.0:
        raise ValidationError("k grid must lie in [1, K_max]", {"k_min": min(k_grid) if k_grid else None})
    hypothesis = check_sign_hypothesis(problem)
    opr = assemble(problem, "tilde", N)

    def norm_at(k):
        try:
            value = weighted_resolvent_norm(opr, k, settings.condition_ceiling)
        except NearSingular as e:
            raise SingularOnRealAxis(f"Operator is numerically singular at real k={k}",
                                     {"k": k, "condition": e.details.get("condition")})
        if not value < REAL_AXIS_CEILING:
            raise SingularOnRealAxis(f"Resolvent norm {value:.3e} at real k={k}", {"k": k, "norm": value})
        return value

    norms = ParallelUtils.map(norm_at, k_grid, settings.threads, settings.progress, "real axis")
    ks = np.array(k_grid)
    logs = np.log(np.array(norms))
    order = np.argsort(ks)
    envelope = np.maximum.accumulate(logs[order])
    C2, C1 = np.polyfit(ks[order], envelope, 1)
    fit = C1 + C2 * ks[order]
    residual = float(np.sqrt(np.mean((envelope - fit) ** 2)))
    C1 += float(np.max(envelope - fit))
    max_violation = float(np.max(logs - (C1 + C2 * ks)))
    logger.info(f"Envelope log||R|| <= {C1:.4f} + {C2:.4f} k, fit residual {residual:.3e}")
    return BoundFit(k_grid, [float(v) for v in norms], [float(v) for v in envelope[np.argsort(order)]],
                    float(C1), float(C2), residual, max_violation, hypothesis)


# GREEN IDENTITY
@dataclass
class GreenCheck:
    delta: float
    omega_indicator: np.ndarray
    lhs: float
    rhs: float
    passed: bool
    k: complex = 0j

    def to_dict(self) -> Dict:
        return {"delta": self.delta, "omega_nodes": int(np.sum(self.omega_indicator)), "lhs": self.lhs,
                "rhs": self.rhs, "pass": self.passed, "k": [self.k.real, self.k.imag]}


def _weighted_norm(weights: np.ndarray, values: np.ndarray) -> float:
    return float(np.sqrt(np.sum(weights * np.abs(values) ** 2)))


def green_identity_check(opr: DiscretizedOperator, k: complex, solution: SolutionPair, f: np.ndarray,
                         g: np.ndarray, delta: float) -> GreenCheck:
    """
    delta * int_omega k^2 |w|^2 <= ||v|| ||g|| + ||w|| ||f|| on omega = {Im n >= delta};
    k-dependent indices use delta * int_omega k |w|^2.
    """
    if opr.form != "tilde":
        raise ValidationError("Green check needs a tilde-form solution", {"form": opr.form})
    imag = np.atleast_1d(opr.problem.index.imaginary_part(*node_coords(opr))) * np.ones(opr.N)
    omega = imag >= delta
    if not np.any(omega):
        raise EmptyOmega(f"No node has Im n >= {delta}", {"delta": delta, "max_imag": float(np.max(imag))})
    w, v = solution.first, solution.second
    weights = opr.weights
    factor = abs(k) if opr.problem.index.k_dependent else abs(k) ** 2
    lhs = float(delta * factor * np.sum(weights[omega] * np.abs(w[omega]) ** 2))
    rhs = _weighted_norm(weights, v) * _weighted_norm(weights, g) + _weighted_norm(weights, w) * _weighted_norm(weights, f)
    passed = lhs <= rhs * (1.0 + 1e-6) + 1e-10
    return GreenCheck(float(delta), omega, lhs, float(rhs), bool(passed), complex(k))


def smooth_data(opr: DiscretizedOperator, rng: np.random.Generator, terms: int = 6) -> np.ndarray:
    """Random cosine series on the collocation nodes"""
    x = opr.nodes
    lo, hi = float(np.min(x)), float(np.max(x))
    t = (x - lo) / (hi - lo) if hi > lo else np.zeros_like(x)
    coeffs = (rng.standard_normal(terms) + 1j * rng.standard_normal(terms)) / (1.0 + np.arange(terms)) ** 2
    return np.cos(np.pi * np.outer(t, np.arange(terms))) @ coeffs


def green_batch(problem: TransmissionProblem, ks: Sequence[float], instances: int, N: int, delta: float,
                rng: np.random.Generator, settings: Optional[SolverSettings] = None) -> List[GreenCheck]:
    settings = settings or SolverSettings()
    opr = assemble(problem, "tilde", N)
    jobs = [(float(k), smooth_data(opr, rng), smooth_data(opr, rng)) for k in ks for _ in range(instances)]

    def one(job):
        k, f, g = job
        pair = apply_resolvent(opr, k, f, g, settings.condition_ceiling)
        return green_identity_check(opr, k, pair, f, g, delta)

    checks = ParallelUtils.map(one, jobs, settings.threads)
    failed = sum(not c.passed for c in checks)
    logger.info(f"Green identity: {len(checks) - failed}/{len(checks)} instances pass")
    return checks


def preflight_direction_warning(problem: TransmissionProblem, requested: Sequence[str]) -> bool:
    """Warn when the envelope bound and a quasimode lower bound are asserted on the same real direction"""
    if not {"bound-fit", "quasimode"} <= set(requested):
        return False
    try:
        check_sign_hypothesis(problem)
    except HypothesisViolated:
        return False
    logger.warning("Upper-envelope and quasimode checks requested for the same real direction; "
                   "their hypotheses cannot hold together, so at most one applies")
    return True
