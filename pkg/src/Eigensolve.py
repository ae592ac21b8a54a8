import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as spl

from src.Discretize import DiscretizedOperator
from src.Exceptions import (GridTooFine, IncompleteCoverage, RegionTouchesCone, UnresolvedCluster,
                            ValidationError)
from src.ITEConfig import SolverSettings
from src.Problem import ConeDescription
from utils.BesselUtils import BesselUtils
from utils.ContourUtils import ContourUtils
from utils.ParallelUtils import ParallelUtils

logger = logging.getLogger("itespec")

Region = Tuple[Tuple[float, float], Tuple[float, float]]

ACCEPT_RELATIVE_SIGMA = 1e-10
NEWTON_MAX_ITER = 50


@dataclass
class SpectrumReport:
    """Eigenvalues in the operator parameter (k for tilde/disk forms, z for bz) with multiplicities"""
    eigenvalues: List[complex]
    multiplicities: List[int]
    search_region: Region
    method: str
    parameter: str = "k"
    dimension: int = 1
    sigma_min: List[float] = field(default_factory=list)
    conjugate_symmetric: Optional[bool] = None
    multiplicity_stable: bool = True
    N_of_t: Dict[float, int] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    @property
    def k_squared(self) -> List[complex]:
        if self.parameter == "z":
            return [-z for z in self.eigenvalues]
        return [k * k for k in self.eigenvalues]

    @property
    def wavenumbers(self) -> List[complex]:
        if self.parameter == "z":
            return [complex(np.sqrt(-z)) for z in self.eigenvalues]
        return list(self.eigenvalues)

    def sorted(self) -> 'SpectrumReport':
        order = sorted(range(len(self.eigenvalues)), key=lambda i: (round(self.eigenvalues[i].real, 9), self.eigenvalues[i].imag))
        pick = lambda seq: [seq[i] for i in order] if seq else seq
        return SpectrumReport(pick(self.eigenvalues), pick(self.multiplicities), self.search_region, self.method,
                              self.parameter, self.dimension, pick(self.sigma_min), self.conjugate_symmetric,
                              self.multiplicity_stable, dict(self.N_of_t), list(self.notes))

    def to_dict(self) -> Dict:
        return {
            "method": self.method,
            "parameter": self.parameter,
            "search_region": [list(self.search_region[0]), list(self.search_region[1])],
            "eigenvalues": [[e.real, e.imag] for e in self.eigenvalues],
            "multiplicities": list(self.multiplicities),
            "conjugate_symmetric": self.conjugate_symmetric,
            "multiplicity_stable": self.multiplicity_stable,
            "notes": list(self.notes),
        }


# CLOSED-FORM ORACLES
def bessel_j(order: int, argument):
    """J_order(argument) for |argument| <= 200, order <= 60"""
    return BesselUtils.bessel_j(order, argument)


def disk_determinant(n_const: complex, m: int, k, radius: float = 1.0):
    """J_m(kR) k sqrt(n) J_m'(k sqrt(n) R) - J_m(k sqrt(n) R) k J_m'(kR)"""
    n_const = complex(n_const)
    if n_const == 0 or n_const == 1:
        raise ValidationError("disk_determinant needs n != 0, 1", {"n": [n_const.real, n_const.imag]})
    k = np.asarray(k, dtype=complex)
    s = np.sqrt(n_const)
    m = abs(int(m))
    j_out, dj_out = BesselUtils.bessel_j_and_derivative(m, k * radius)
    j_in, dj_in = BesselUtils.bessel_j_and_derivative(m, k * s * radius)
    value = j_out * k * s * dj_in - j_in * k * dj_out
    return value if np.ndim(value) else complex(value)


def interval_determinant(n_const: complex, k, length: float = 1.0):
    """4x4 matching determinant for w = A cos(sx) + B sin(sx), v = C cos(kx) + D sin(kx), s = k sqrt(n)"""
    k = np.asarray(k, dtype=complex)
    s = k * np.sqrt(complex(n_const))
    L = length
    one, zero = np.ones_like(k), np.zeros_like(k)
    cs, ss = np.cos(s * L), np.sin(s * L)
    ck, sk = np.cos(k * L), np.sin(k * L)
    rows = [
        [one, zero, -one, zero],
        [zero, s, zero, -k],
        [cs, ss, -ck, -sk],
        [-s * ss, s * cs, k * sk, -k * ck],
    ]
    M = np.moveaxis(np.array(rows, dtype=complex), (0, 1), (-2, -1))
    value = np.linalg.det(M)
    return value if np.ndim(value) else complex(value)


def _offset_region(region: Region, cell_size: float) -> Region:
    (x0, x1), (y0, y1) = region
    # k = 0 is a root of every determinant and not a transmission eigenvalue
    if x0 <= 0 < x1:
        x0 = 0.01 * cell_size
    # real roots must not sit on a horizontal edge
    if abs(y0) < 1e-12:
        y0 = -0.37 * cell_size
    if abs(y1) < 1e-12:
        y1 = 0.37 * cell_size
    return (x0, x1), (y0, y1)


def oracle_spectrum(determinant: Callable, region: Region, cell_size: float = 0.5,
                    tol: float = 1e-12, dimension: int = 1) -> SpectrumReport:
    """Roots of a vectorised closed-form determinant in a k-rectangle by argument-principle cells"""
    region = _offset_region(region, cell_size)
    roots = ContourUtils.roots_in_rectangle(determinant, region[0], region[1], cell_size, tol)
    roots.sort(key=lambda r: (r[0].real, r[0].imag))
    report = SpectrumReport([r for r, _ in roots], [m for _, m in roots], region, "ContourCount",
                            "k", dimension)
    report.conjugate_symmetric = _conjugate_flag(report.eigenvalues, region)
    logger.info(f"Oracle located {len(roots)} roots in {region}")
    return report


# DISCRETE SOLVER
def _grid_axes(region: Region, resolution) -> Tuple[np.ndarray, np.ndarray]:
    (x0, x1), (y0, y1) = region
    if isinstance(resolution, dict):
        dx, dy = float(resolution["re_step"]), float(resolution["im_step"])
    else:
        dx = dy = float(resolution)
    nx = max(int(round((x1 - x0) / dx)), 0) + 1
    ny = max(int(round((y1 - y0) / dy)), 0) + 1
    return np.linspace(x0, x1, nx), np.linspace(y0, y1, ny)


def relative_sigma_min(A: np.ndarray) -> float:
    s = spl.svdvals(A)
    return float(s[-1] / s[0]) if s[0] > 0 else 0.0


def _smallest_triple(A: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray, float]:
    U, s, Vh = np.linalg.svd(A)
    return float(s[-1]), U[:, -1], Vh[-1].conj(), float(s[0])


def refine_singular(opr: DiscretizedOperator, start: complex, tol: float) -> Tuple[Optional[complex], float]:
    """Newton on sigma_min through the singular triple: delta = -sigma / (u^H T'(p) v)"""
    p = complex(start)
    for _ in range(NEWTON_MAX_ITER):
        A = opr.matrix_of(p)
        sigma, u, v, smax = _smallest_triple(A)
        step = 1e-6 * max(1.0, abs(p))
        dA = (opr.matrix_of(p + step) - opr.matrix_of(p - step)) / (2.0 * step)
        slope = complex(np.conj(u) @ dA @ v)
        if slope == 0 or not np.isfinite(slope):
            return None, sigma / smax
        delta = -sigma / slope
        p = p + delta
        if abs(delta) < tol * max(1.0, abs(p)):
            sigma, _, _, smax = _smallest_triple(opr.matrix_of(p))
            return p, sigma / smax
    return None, np.inf


def determinant_phase(opr: DiscretizedOperator) -> Callable[[complex], complex]:
    def phase(p):
        sign, _ = np.linalg.slogdet(opr.matrix_of(p))
        return complex(sign)
    return phase


def winding_multiplicity(opr: DiscretizedOperator, root: complex, radius: float) -> Tuple[int, bool]:
    """Winding of det T around the root and whether it survives halving the radius"""
    phase = determinant_phase(opr)
    full = ContourUtils.circle_winding(phase, root, radius)
    half = ContourUtils.circle_winding(phase, root, radius / 2.0)
    return full, full == half


def _local_minima(values: np.ndarray) -> List[Tuple[int, int]]:
    nx, ny = values.shape
    padded = np.pad(values, 1, constant_values=np.inf)
    minima = []
    for i in range(nx):
        for j in range(ny):
            window = padded[i:i + 3, j:j + 3]
            if np.isfinite(values[i, j]) and values[i, j] <= window.min():
                minima.append((i, j))
    return minima


def _conjugate_flag(eigenvalues: Sequence[complex], region: Region, tol: float = 1e-8) -> Optional[bool]:
    """True when every eigenvalue whose conjugate lies in the region has a conjugate partner"""
    (x0, x1), (y0, y1) = region
    checked = False
    for e in eigenvalues:
        c = np.conj(e)
        if not (x0 <= c.real <= x1 and y0 <= c.imag <= y1):
            continue
        checked = True
        if not any(abs(c - other) <= tol * max(1.0, abs(e)) for other in eigenvalues):
            return False
    return True if checked else None


def node_coords(opr: DiscretizedOperator) -> Tuple[np.ndarray, ...]:
    return (opr.nodes,) if opr.mode is None else (opr.nodes, np.zeros_like(opr.nodes))


def _index_is_real(opr: DiscretizedOperator) -> bool:
    if opr.problem is None:
        return False
    return bool(np.all(opr.problem.index.imaginary_part(*node_coords(opr)) == 0))


def _check_cone(opr: DiscretizedOperator, xs: np.ndarray, ys: np.ndarray,
                cone: Optional[ConeDescription], margin: float) -> None:
    if opr.form != "bz" or cone is None or margin <= 0:
        return
    pts = (xs[:, None] + 1j * ys[None, :]).ravel()
    pts = pts[np.abs(pts) > 0]
    if cone.is_full_plane and pts.size:
        raise RegionTouchesCone("Search region meets the cone (full plane)", {"margin": margin})
    theta1 = cone.sector[0]
    for z in pts:
        angle = float(np.mod(np.angle(z), 2.0 * np.pi))
        rel = (angle - theta1) % (2.0 * np.pi)
        outside = min(abs(rel - cone.span), 2.0 * np.pi - rel) if rel > cone.span else 0.0
        if outside < margin:
            raise RegionTouchesCone(f"Search point {z} is within {margin} rad of the cone",
                                    {"point": [z.real, z.imag], "margin": margin})


def find_eigenvalues(opr: DiscretizedOperator, region: Region, resolution,
                     settings: Optional[SolverSettings] = None, cone: Optional[ConeDescription] = None,
                     cone_margin: float = 0.0) -> SpectrumReport:
    """
    sigma_min grid scan, Newton refinement of local minima on the singular triple,
    and multiplicity by the winding number of det T around each root.
    """
    settings = settings or SolverSettings()
    xs, ys = _grid_axes(region, resolution)
    if xs.size * ys.size > settings.max_grid_cells:
        raise GridTooFine(f"{xs.size * ys.size} grid nodes above budget {settings.max_grid_cells}",
                          {"nodes": int(xs.size * ys.size), "budget": settings.max_grid_cells})
    _check_cone(opr, xs, ys, cone, cone_margin)

    points = [complex(x, y) for x in xs for y in ys]
    scale = max(1.0, max(abs(p) for p in points))

    def scan(p):
        if abs(p) < 1e-8 * scale:
            return np.inf
        return relative_sigma_min(opr.matrix_of(p))

    values = np.array(ParallelUtils.map(scan, points, settings.threads, settings.progress, "sigma_min scan"))
    values = values.reshape(xs.size, ys.size)
    starts = [complex(xs[i], ys[j]) for i, j in _local_minima(values)]
    logger.info(f"Scan of {values.size} nodes found {len(starts)} local minima")

    (x0, x1), (y0, y1) = region
    slack_x = 0.5 * (xs[1] - xs[0]) if xs.size > 1 else 0.0
    slack_y = 0.5 * (ys[1] - ys[0]) if ys.size > 1 else 0.0

    def refine(start):
        return refine_singular(opr, start, 1e-2 * settings.refine_tolerance)

    refined = ParallelUtils.map(refine, starts, settings.threads)
    accepted: List[Tuple[complex, float]] = []
    for root, rel_sigma in refined:
        if root is None or rel_sigma > ACCEPT_RELATIVE_SIGMA:
            continue
        if abs(root) < 1e-6 * scale:
            continue
        if not (x0 - 1e-9 <= root.real <= x1 + 1e-9 and y0 - 1e-9 <= root.imag <= y1 + 1e-9):
            continue
        accepted.append((root, rel_sigma))

    unique: List[Tuple[complex, float]] = []
    for root, rel_sigma in sorted(accepted, key=lambda r: (r[0].real, r[0].imag)):
        duplicate = False
        for other, _ in unique:
            gap = abs(root - other)
            if gap <= settings.dedupe_tolerance * max(1.0, abs(root)):
                duplicate = True
                break
            if gap < settings.cluster_tolerance:
                raise UnresolvedCluster(f"Roots {other} and {root} closer than {settings.cluster_tolerance}",
                                        {"roots": [[other.real, other.imag], [root.real, root.imag]], "gap": gap})
        if not duplicate:
            unique.append((root, rel_sigma))

    radius_of = lambda r: 10.0 * settings.refine_tolerance * max(1.0, abs(r))
    windings = ParallelUtils.map(lambda item: winding_multiplicity(opr, item[0], radius_of(item[0])),
                                 unique, settings.threads)
    report = assign_multiplicities(unique, windings, region, opr.parameter, 2 if opr.mode is not None else 1)
    if _index_is_real(opr):
        report.conjugate_symmetric = _conjugate_flag(report.eigenvalues, region)
    logger.info(f"Located {len(report.eigenvalues)} eigenvalues ({opr.form}, mode {opr.mode})")
    return report


def assign_multiplicities(roots: Sequence[Tuple[complex, float]], windings: Sequence[Tuple[int, bool]],
                          region: Region, parameter: str = "k", dimension: int = 1) -> SpectrumReport:
    """
    Report from refined (root, relative sigma) pairs and their (winding, stable under halving) results.
    A root with winding <= 0 has no established multiplicity: it is left out of the eigenvalues,
    listed in the notes and the report is marked unstable.
    """
    eigenvalues, multiplicities, sigmas, unresolved = [], [], [], []
    stable = True
    for (root, rel_sigma), (mult, same) in zip(roots, windings):
        if mult <= 0:
            logger.warning(f"Winding number {mult} at refined root {root}; multiplicity unresolved")
            unresolved.append(root)
            continue
        stable = stable and same
        eigenvalues.append(root)
        multiplicities.append(mult)
        sigmas.append(rel_sigma)
    stable = stable and not unresolved

    report = SpectrumReport(eigenvalues, multiplicities, region, "SigmaMinRefine", parameter, dimension,
                            sigmas, None, stable)
    report.notes.append("multiplicity is the winding number of det T, a surrogate for dim E_j")
    if any(not same for (mult, same) in windings if mult > 0):
        report.notes.append("winding number changed when the circle radius was halved")
    for root in unresolved:
        report.notes.append(f"unresolved root {root.real:.12g}{root.imag:+.12g}j: winding number <= 0")
    return report


def merge_mode_reports(reports: Dict[int, SpectrumReport]) -> SpectrumReport:
    """Union over angular modes m >= 0; m != 0 counts twice (cos and sin partners)"""
    eigenvalues, multiplicities, sigmas = [], [], []
    method, region, parameter = "SigmaMinRefine", None, "k"
    stable, symmetric = True, None
    for m in sorted(reports):
        rep = reports[m]
        factor = 1 if m == 0 else 2
        eigenvalues.extend(rep.eigenvalues)
        multiplicities.extend(factor * x for x in rep.multiplicities)
        sigmas.extend(rep.sigma_min or [np.nan] * len(rep.eigenvalues))
        method, region, parameter = rep.method, rep.search_region, rep.parameter
        stable = stable and rep.multiplicity_stable
        if rep.conjugate_symmetric is not None:
            symmetric = rep.conjugate_symmetric if symmetric is None else (symmetric and rep.conjugate_symmetric)
    merged = SpectrumReport(eigenvalues, multiplicities, region, method, parameter, 2, sigmas, symmetric, stable)
    return merged.sorted()


@dataclass
class CountingResult:
    t_grid: List[float]
    N_values: List[int]
    slope: Optional[float]
    C_upper: Optional[float]
    dimension: int

    def to_dict(self) -> Dict:
        return {"t": self.t_grid, "N": self.N_values, "slope": self.slope,
                "C_upper": self.C_upper, "dimension": self.dimension}


def counting_function(report: SpectrumReport, t_grid: Sequence[float]) -> CountingResult:
    """N(t) = sum of multiplicities over |k_j| <= t, log-log slope on the upper half of the grid"""
    t_grid = sorted(float(t) for t in t_grid)
    if not t_grid or t_grid[0] <= 0:
        raise ValidationError("t grid must be positive and nonempty", {"t_grid": t_grid})
    (x0, x1), (y0, y1) = report.search_region
    t_max = t_grid[-1]
    if x1 < t_max or y0 > -t_max or y1 < t_max or x0 > t_grid[0]:
        raise IncompleteCoverage(f"Search region {report.search_region} does not cover |k| <= {t_max}",
                                 {"region": [[x0, x1], [y0, y1]], "t_max": t_max})
    moduli = np.array([abs(k) for k in report.wavenumbers])
    mults = np.array(report.multiplicities, dtype=int)
    N_values = [int(mults[moduli <= t].sum()) if moduli.size else 0 for t in t_grid]
    report.N_of_t = dict(zip(t_grid, N_values))

    upper = [(t, n) for t, n in zip(t_grid[len(t_grid) // 2:], N_values[len(t_grid) // 2:]) if n > 0]
    slope = None
    if len(upper) >= 2:
        slope = float(np.polyfit(np.log([t for t, _ in upper]), np.log([n for _, n in upper]), 1)[0])
    power = report.dimension + 4
    C_upper = float(max(n / t ** power for t, n in zip(t_grid, N_values)))
    return CountingResult(t_grid, N_values, slope, C_upper, report.dimension)
