import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from src.Exceptions import GeometryMismatch, ModeTooLarge, NearSingular, NotRadial, TooFewNodes, ValidationError
from src.Problem import Disk, Interval, TransmissionProblem
from utils.ChebyshevUtils import ChebyshevUtils
from utils.ReportUtils import ReportUtils

logger = logging.getLogger("itespec")

MIN_NODES = 16
MAX_MODE = 60
CONDITION_CEILING = 1e14
FORMS = ("bz", "tilde")
FORM_TAGS = {"bz": 1, "tilde": 2, "disk_mode": 3}


@dataclass(frozen=True)
class DiscretizedOperator:
    """
    Collocation realisation of B_z (form "bz", parameter z) or of the R~ system
    (form "tilde", parameter k). Unknowns are stacked [first; second], N nodes each.
    """
    form: str
    mode: Optional[int]
    N: int
    assembler: Callable[[complex], np.ndarray]
    nodes: np.ndarray
    weights: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    boundary_rows: Tuple[int, ...]
    problem: TransmissionProblem = field(repr=False, default=None)
    geometry_kind: str = "interval"

    @property
    def size(self) -> int:
        return 2 * self.N

    @property
    def parameter(self) -> str:
        return "z" if self.form == "bz" else "k"

    @property
    def interior_rows(self) -> np.ndarray:
        mask = np.ones(self.size, dtype=bool)
        mask[list(self.boundary_rows)] = False
        return np.where(mask)[0]

    @property
    def form_tag(self) -> int:
        return FORM_TAGS["disk_mode"] if self.mode is not None else FORM_TAGS[self.form]

    def matrix_of(self, param: complex) -> np.ndarray:
        return self.assembler(complex(param))

    def k_of(self, param: complex) -> complex:
        """Wavenumber for the parameter; z = -k^2 in the bz form"""
        return complex(np.sqrt(-complex(param))) if self.form == "bz" else complex(param)

    def rhs(self, f: np.ndarray, g: np.ndarray) -> np.ndarray:
        """Data go to interior rows only; boundary rows carry homogeneous conditions"""
        b = np.concatenate([np.asarray(f, dtype=complex), np.asarray(g, dtype=complex)])
        b[list(self.boundary_rows)] = 0
        return b

    def interior_selector(self) -> np.ndarray:
        """E: columns of the identity at interior rows"""
        return np.eye(self.size, dtype=complex)[:, self.interior_rows]


@dataclass
class SolutionPair:
    first: np.ndarray
    second: np.ndarray
    norms: Dict[str, float] = field(default_factory=dict)


def discrete_norms(opr: DiscretizedOperator, values: np.ndarray) -> Dict[str, float]:
    """L2, H1, H2 and graph (||v|| + ||D^2 v||) norms with the stored quadrature"""
    w = opr.weights
    l2 = float(np.sqrt(np.sum(w * np.abs(values) ** 2)))
    d1v = opr.d1 @ values
    d2v = opr.d2 @ values
    h1 = float(np.sqrt(l2 ** 2 + np.sum(w * np.abs(d1v) ** 2)))
    h2 = float(np.sqrt(h1 ** 2 + np.sum(w * np.abs(d2v) ** 2)))
    graph = l2 + float(np.sqrt(np.sum(w * np.abs(d2v) ** 2)))
    return {"L2": l2, "H1": h1, "H2": h2, "graph": graph}


def make_pair(opr: DiscretizedOperator, first: np.ndarray, second: np.ndarray) -> SolutionPair:
    norms = {}
    for label, values in (("first", first), ("second", second)):
        for key, value in discrete_norms(opr, values).items():
            norms[f"{label}_{key}"] = value
    return SolutionPair(np.asarray(first), np.asarray(second), norms)


def _index_values(problem: TransmissionProblem, coords: Tuple[np.ndarray, ...]) -> Callable[[complex], np.ndarray]:
    """n at the nodes for a wavenumber k; fixed indices are evaluated once"""
    if not problem.index.k_dependent:
        n_fixed = problem.index.principal(*coords)
        return lambda k: n_fixed
    return lambda k: problem.index.evaluate(*coords, k=k)


def _block_assembler(form: str, L: np.ndarray, d1: np.ndarray, n_at: Callable[[complex], np.ndarray],
                     ends: Sequence[int]) -> Callable[[complex], np.ndarray]:
    N = L.shape[0]
    I = np.eye(N)
    ends = list(ends)

    if form == "bz":
        def assemble(z: complex) -> np.ndarray:
            n = n_at(complex(np.sqrt(-z))) if z != 0 else n_at(1.0)
            a, V = 1.0 / n, (n - 1.0) / n
            A = np.zeros((2 * N, 2 * N), dtype=complex)
            A[:N, :N] = a[:, None] * L - z * I
            A[:N, N:] = np.diag(V)
            A[N:, N:] = L - z * I
            # clamped u: u = 0 on the u-block ends, u' = 0 on the v-block ends
            for e in ends:
                A[e, :] = 0
                A[e, e] = 1.0
                A[N + e, :] = 0
                A[N + e, :N] = d1[e]
            return A
        return assemble

    if form == "tilde":
        def assemble(k: complex) -> np.ndarray:
            n = n_at(k)
            A = np.zeros((2 * N, 2 * N), dtype=complex)
            A[:N, :N] = L + np.diag(k * k * n)
            A[N:, N:] = L + k * k * I
            # matching: w = v on the w-block ends, w' = v' on the v-block ends
            for e in ends:
                A[e, :] = 0
                A[e, e] = 1.0
                A[e, N + e] = -1.0
                A[N + e, :] = 0
                A[N + e, :N] = d1[e]
                A[N + e, N:] = -d1[e]
            return A
        return assemble

    raise ValidationError(f"Unknown form: {form}", {"form": form})


def assemble_interval(problem: TransmissionProblem, form: str, N: int) -> DiscretizedOperator:
    if N < MIN_NODES:
        raise TooFewNodes(f"Need at least {MIN_NODES} nodes, got {N}", {"N": N, "min": MIN_NODES})
    if not isinstance(problem.geometry, Interval):
        raise GeometryMismatch(f"assemble_interval needs an interval, got {problem.geometry.kind}",
                               {"geometry": problem.geometry.kind})
    if form not in FORMS:
        raise ValidationError(f"Unknown form: {form}", {"form": form})
    g = problem.geometry
    nodes, d1, d2, weights = ChebyshevUtils.interval_operators(g.a_end, g.b_end, N)
    ends = (0, N - 1)
    assembler = _block_assembler(form, d2, d1, _index_values(problem, (nodes,)), ends)
    logger.debug(f"Assembled {form} interval operator, N={N}")
    return DiscretizedOperator(form, None, N, assembler, nodes, weights, d1, d2,
                               (0, N - 1, N, 2 * N - 1), problem, "interval")


def check_radial(problem: TransmissionProblem, radii: np.ndarray, angles: int = 16, tol: float = 1e-10) -> None:
    theta = np.linspace(0.0, 2.0 * np.pi, angles, endpoint=False)
    base = problem.index.principal(radii, np.zeros_like(radii))
    evaluators = [problem.index.principal]
    if problem.index.k_dependent:
        evaluators.append(problem.index.n2_eval)
    for evaluate in evaluators:
        base = evaluate(radii, np.zeros_like(radii))
        for t in theta[1:]:
            values = evaluate(radii * np.cos(t), radii * np.sin(t))
            gap = float(np.max(np.abs(values - base)))
            if gap > tol * max(1.0, float(np.max(np.abs(base)))):
                raise NotRadial(f"Index varies with angle (gap {gap:.3e} at theta={t:.3f})",
                                {"gap": gap, "theta": float(t)})


def assemble_disk_mode(problem: TransmissionProblem, m: int, form: str, N: int) -> DiscretizedOperator:
    """Radial operator d^2/dr^2 + (1/r) d/dr - m^2/r^2 on folded Chebyshev nodes; r = R is row 0"""
    if not isinstance(problem.geometry, Disk):
        raise GeometryMismatch(f"assemble_disk_mode needs a disk, got {problem.geometry.kind}",
                               {"geometry": problem.geometry.kind})
    if abs(m) > MAX_MODE:
        raise ModeTooLarge(f"Angular mode {m} above {MAX_MODE}", {"m": m, "max": MAX_MODE})
    if N < MIN_NODES:
        raise TooFewNodes(f"Need at least {MIN_NODES} nodes, got {N}", {"N": N, "min": MIN_NODES})
    if form not in FORMS:
        raise ValidationError(f"Unknown form: {form}", {"form": form})
    radius = problem.geometry.radius
    r, d1, d2, weights = ChebyshevUtils.radial_operators(radius, N, m)
    check_radial(problem, r)
    L = d2 + np.diag(1.0 / r) @ d1 - np.diag(float(m * m) / r ** 2)
    assembler = _block_assembler(form, L, d1, _index_values(problem, (r, np.zeros_like(r))), (0,))
    logger.debug(f"Assembled {form} disk operator, m={m}, N={N}")
    return DiscretizedOperator(form, int(m), N, assembler, r, weights, d1, d2, (0, N), problem, "disk")


def assemble(problem: TransmissionProblem, form: str, N: int, mode: Optional[int] = None) -> DiscretizedOperator:
    if isinstance(problem.geometry, Disk):
        return assemble_disk_mode(problem, 0 if mode is None else mode, form, N)
    return assemble_interval(problem, form, N)


def condition_number(A: np.ndarray) -> float:
    s = np.linalg.svd(A, compute_uv=False)
    return float(s[0] / s[-1]) if s[-1] > 0 else np.inf


def solve_checked(opr: DiscretizedOperator, param: complex, b: np.ndarray,
                  ceiling: float = CONDITION_CEILING) -> np.ndarray:
    A = opr.matrix_of(param)
    cond = condition_number(A)
    if not cond < ceiling:
        raise NearSingular(f"Condition number {cond:.3e} at {opr.parameter}={param} above {ceiling:.0e}",
                           {"condition": cond, "param": [complex(param).real, complex(param).imag]})
    return np.linalg.solve(A, b)


def apply_resolvent(opr: DiscretizedOperator, param: complex, f: np.ndarray, g: np.ndarray,
                    ceiling: float = CONDITION_CEILING) -> SolutionPair:
    """(u, v) = R_z(f, g) for bz, (w, v) = R~(f, g) for tilde"""
    x = solve_checked(opr, param, opr.rhs(f, g), ceiling)
    return make_pair(opr, x[:opr.N], x[opr.N:])


def restricted_resolvent(opr: DiscretizedOperator, param: complex, ceiling: float = CONDITION_CEILING) -> np.ndarray:
    """S = E^T T(param)^-1 E on interior rows"""
    A = opr.matrix_of(param)
    cond = condition_number(A)
    if not cond < ceiling:
        raise NearSingular(f"Condition number {cond:.3e} above {ceiling:.0e}", {"condition": cond})
    E = opr.interior_selector()
    return E.T @ np.linalg.solve(A, E)


def resolvent_identity_defect(opr: DiscretizedOperator, z1: complex, z2: complex) -> float:
    """|| S_z1 - S_z2 - (z1 - z2) S_z1 S_z2 || / ||S_z1 - S_z2||, Frobenius"""
    if opr.form != "bz":
        raise ValidationError("Resolvent identity is stated for the bz form", {"form": opr.form})
    if opr.problem is not None and opr.problem.index.k_dependent:
        raise ValidationError("Resolvent identity needs z-independent coefficients", {"index": "k_dependent"})
    S1 = restricted_resolvent(opr, z1)
    S2 = restricted_resolvent(opr, z2)
    lhs = S1 - S2
    defect = lhs - (z1 - z2) * (S1 @ S2)
    return float(np.linalg.norm(defect) / max(np.linalg.norm(lhs), 1e-300))


def apriori_ratios(opr: DiscretizedOperator, z0: complex, f: np.ndarray,
                   lambdas: Sequence[float] = (1e2, 1e3, 1e4), g: Optional[np.ndarray] = None) -> Dict[str, object]:
    """
    |z|^2 ||u|| / (||f|| + |z|^-2 ||g||) along z = lambda z0 and the growth exponent per decade.
    Non-exploding means every exponent stays at or below 1.25.
    """
    g = np.zeros(opr.N, dtype=complex) if g is None else g
    f_norm = float(np.sqrt(np.sum(opr.weights * np.abs(f) ** 2)))
    g_norm = float(np.sqrt(np.sum(opr.weights * np.abs(g) ** 2)))
    ratios = []
    for lam in lambdas:
        z = lam * z0
        pair = apply_resolvent(opr, z, f, g)
        ratios.append(abs(z) ** 2 * pair.norms["first_L2"] / (f_norm + abs(z) ** -2 * g_norm))
    exponents = [float(np.log10(ratios[i + 1] / ratios[i]) / np.log10(lambdas[i + 1] / lambdas[i]))
                 for i in range(len(ratios) - 1)]
    return {"lambdas": list(lambdas), "ratios": ratios, "exponents": exponents,
            "pass": all(e <= 1.25 for e in exponents)}


def green_formula_defect(opr: DiscretizedOperator, v: np.ndarray, q: np.ndarray) -> float:
    """
    Relative defect of (v|q'') - (v''|q) = [v conj(q') - v' conj(q)] over the interval ends,
    with (a|b) the integral of a conj(b).
    """
    if opr.geometry_kind != "interval":
        raise GeometryMismatch("Green formula check is implemented on the interval", {"geometry": opr.geometry_kind})
    w = opr.weights
    d2v, d2q = opr.d2 @ v, opr.d2 @ q
    d1v, d1q = opr.d1 @ v, opr.d1 @ q
    volume = np.sum(w * v * np.conj(d2q)) - np.sum(w * d2v * np.conj(q))
    right = (v[-1] * np.conj(d1q[-1]) - d1v[-1] * np.conj(q[-1])) - (v[0] * np.conj(d1q[0]) - d1v[0] * np.conj(q[0]))
    scale = max(abs(np.sum(w * v * np.conj(d2q))), abs(np.sum(w * d2v * np.conj(q))), abs(right), 1e-300)
    return float(abs(volume - right) / scale)


def dump_matrix(opr: DiscretizedOperator, param: complex, path: Path) -> Path:
    return ReportUtils.write_matrix(path, opr.matrix_of(param), opr.form_tag)


def load_matrix(path: Path) -> Tuple[np.ndarray, int]:
    return ReportUtils.read_matrix(path)
