import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np
import sympy as sp

from src.Exceptions import (BadGeometry, IndexOneOnCollar, IndexVanishes, NoAdmissibleDirection,
                            ValidationError, ZeroSpectralParameter)

logger = logging.getLogger("itespec")

INDEX_TOLERANCE = 1e-10
MIN_SAMPLES_1D = 1000
MIN_SAMPLES_2D = 10000
DIRECTION_GRID = 1024
FULL_PLANE_GAP = 1e-3

X, Y, R_SYM = sp.symbols("x y r", real=True)


# GEOMETRIES
@dataclass(frozen=True)
class Interval:
    a_end: float
    b_end: float
    kind: str = "interval"

    @property
    def dimension(self) -> int:
        return 1

    @property
    def measure(self) -> float:
        return self.b_end - self.a_end

    def sample(self, count: int) -> Tuple[np.ndarray, ...]:
        return (np.linspace(self.a_end, self.b_end, max(count, MIN_SAMPLES_1D)),)

    def collar_sample(self, width: float, count: int) -> Tuple[np.ndarray, ...]:
        half = max(count, MIN_SAMPLES_1D) // 2
        width = min(width, self.measure / 2)
        left = np.linspace(self.a_end, self.a_end + width, half)
        right = np.linspace(self.b_end - width, self.b_end, half)
        return (np.concatenate([left, right]),)

    def boundary_sample(self, count: int = 2) -> Tuple[np.ndarray, ...]:
        return (np.array([self.a_end, self.b_end]),)


@dataclass(frozen=True)
class Disk:
    radius: float
    kind: str = "disk"

    @property
    def dimension(self) -> int:
        return 2

    @property
    def measure(self) -> float:
        return float(np.pi * self.radius ** 2)

    def _polar(self, r_lo: float, count: int) -> Tuple[np.ndarray, ...]:
        side = int(np.ceil(np.sqrt(max(count, MIN_SAMPLES_2D))))
        r = np.linspace(r_lo, self.radius, side)
        theta = np.linspace(0.0, 2.0 * np.pi, side, endpoint=False)
        rr, tt = np.meshgrid(r, theta, indexing="ij")
        return (rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()

    def sample(self, count: int) -> Tuple[np.ndarray, ...]:
        return self._polar(0.0, count)

    def collar_sample(self, width: float, count: int) -> Tuple[np.ndarray, ...]:
        return self._polar(max(self.radius - width, 0.0), count)

    def boundary_sample(self, count: int = 256) -> Tuple[np.ndarray, ...]:
        theta = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)
        return self.radius * np.cos(theta), self.radius * np.sin(theta)


@dataclass(frozen=True)
class HalfSpaceModel:
    """Flat boundary model {x_n > 0}; coefficients are sampled on 0 <= x_n <= depth"""
    depth: float = 1.0
    kind: str = "halfspace"

    @property
    def dimension(self) -> int:
        return 1

    @property
    def measure(self) -> float:
        return self.depth

    def sample(self, count: int) -> Tuple[np.ndarray, ...]:
        return (np.linspace(0.0, self.depth, max(count, MIN_SAMPLES_1D)),)

    def collar_sample(self, width: float, count: int) -> Tuple[np.ndarray, ...]:
        return (np.linspace(0.0, min(width, self.depth), max(count, MIN_SAMPLES_1D)),)

    def boundary_sample(self, count: int = 1) -> Tuple[np.ndarray, ...]:
        return (np.array([0.0]),)


# INDEX
@dataclass(frozen=True)
class RefractionIndex:
    """
    Refraction index n(x). In "fixed" mode n_eval returns complex n; in "k_dependent"
    mode n = n1 + i n2 / k with n_eval -> n1 and n2_eval -> n2 (both real).
    """
    mode: str
    n_eval: Callable[..., np.ndarray]
    n2_eval: Optional[Callable[..., np.ndarray]] = None
    smoothness_degree: int = 2
    expressions: Dict[str, str] = field(default_factory=dict)
    radial: bool = False

    def __post_init__(self):
        if self.mode not in ("fixed", "k_dependent"):
            raise ValidationError(f"Unknown index mode: {self.mode}", {"field": "problem.index.mode"})
        if self.mode == "k_dependent" and self.n2_eval is None:
            raise ValidationError("k_dependent index needs n2", {"field": "problem.index.n2"})

    @property
    def k_dependent(self) -> bool:
        return self.mode == "k_dependent"

    def principal(self, *coords) -> np.ndarray:
        """n for fixed indices, n1 for k-dependent ones (the k -> infinity limit)"""
        return self.n_eval(*coords)

    def imaginary_part(self, *coords) -> np.ndarray:
        if self.k_dependent:
            return np.real(self.n2_eval(*coords))
        return np.imag(self.n_eval(*coords))

    def evaluate(self, *coords, k: Optional[complex] = None) -> np.ndarray:
        if not self.k_dependent:
            return self.n_eval(*coords)
        if k is None or k == 0:
            raise ValidationError("k_dependent index needs a nonzero k", {"k": k})
        return np.real(self.n_eval(*coords)) + 1j * np.real(self.n2_eval(*coords)) / k


@dataclass(frozen=True)
class TransmissionProblem:
    geometry: Any
    index: RefractionIndex
    collar_width: float
    sample_count: int = 10000

    def n(self, *coords, k: Optional[complex] = None) -> np.ndarray:
        return self.index.evaluate(*coords, k=k) if self.index.k_dependent else self.index.principal(*coords)

    def m(self, *coords, k: Optional[complex] = None) -> np.ndarray:
        return self.n(*coords, k=k) - 1.0

    def a(self, *coords, k: Optional[complex] = None) -> np.ndarray:
        """a = 1/(1+m)"""
        return 1.0 / self.n(*coords, k=k)

    def V(self, *coords, k: Optional[complex] = None) -> np.ndarray:
        """V = m/(1+m)"""
        n = self.n(*coords, k=k)
        return (n - 1.0) / n

    def V_at_h0(self, *coords) -> np.ndarray:
        """Principal-level V, (n1 - 1)/n1 for k-dependent indices"""
        n1 = self.index.principal(*coords)
        return (n1 - 1.0) / n1

    def to_dict(self) -> Dict[str, Any]:
        return {
            "geometry": self.geometry.kind,
            "index_mode": self.index.mode,
            "expressions": dict(self.index.expressions),
            "collar_width": self.collar_width,
        }


@dataclass(frozen=True)
class ConeDescription:
    is_full_plane: bool
    sector: Optional[Tuple[float, float]]
    span: float = 0.0

    def contains_angle(self, angle: float, tol: float = 1e-12) -> bool:
        if self.is_full_plane:
            return True
        theta1 = self.sector[0]
        return (angle - theta1) % (2.0 * np.pi) <= self.span + tol

    def to_dict(self) -> Dict[str, Any]:
        return {"is_full_plane": self.is_full_plane, "sector": self.sector, "span": self.span}


@dataclass(frozen=True)
class SemiclassicalPoint:
    z: complex
    h: float
    mu: complex
    k: complex


# CONFIG PARSING
def _lambdify(expr_source: Any, variables: Tuple[sp.Symbol, ...], disk: bool) -> Tuple[Callable, str, bool]:
    """Compile an expression string (or number) to a vectorised numpy evaluator"""
    expr = sp.sympify(expr_source, locals={"x": X, "y": Y, "r": R_SYM, "I": sp.I})
    text = str(expr)
    uses_angle = disk and bool(expr.free_symbols & {X, Y})
    if disk:
        expr = expr.subs(R_SYM, sp.sqrt(X ** 2 + Y ** 2))
    unknown = expr.free_symbols - set(variables)
    if unknown:
        raise ValidationError(f"Index expression '{text}' uses unknown symbols {sorted(map(str, unknown))}",
                              {"field": "problem.index"})
    compiled = sp.lambdify(variables, expr, modules="numpy")

    def evaluate(*coords):
        shape = np.shape(coords[0])
        return np.broadcast_to(np.asarray(compiled(*coords), dtype=complex), shape).copy()

    return evaluate, text, not uses_angle


def compile_expression(expr_source: Any, disk: bool = False) -> Callable:
    """Numpy evaluator of an expression in x (or x, y, r on the disk)"""
    evaluate, _, _ = _lambdify(expr_source, (X, Y) if disk else (X,), disk)
    return evaluate


def build_geometry(block: Dict[str, Any]):
    kind = block.get("type")
    if kind == "interval":
        a_end, b_end = float(block.get("a", 0.0)), float(block.get("b", 1.0))
        if not b_end > a_end:
            raise BadGeometry(f"Empty interval [{a_end}, {b_end}]", {"field": "problem.geometry", "a": a_end, "b": b_end})
        return Interval(a_end, b_end)
    if kind == "disk":
        radius = float(block.get("radius", 1.0))
        if radius <= 0:
            raise BadGeometry(f"Nonpositive radius {radius}", {"field": "problem.geometry.radius", "radius": radius})
        return Disk(radius)
    if kind == "halfspace":
        depth = float(block.get("depth", 1.0))
        if depth <= 0:
            raise BadGeometry(f"Nonpositive depth {depth}", {"field": "problem.geometry.depth", "depth": depth})
        return HalfSpaceModel(depth)
    raise BadGeometry(f"Unknown geometry type: {kind}", {"field": "problem.geometry.type"})


def build_index(block: Dict[str, Any], geometry) -> RefractionIndex:
    disk = isinstance(geometry, Disk)
    variables = (X, Y) if disk else (X,)
    mode = block.get("mode", "fixed")
    smoothness = int(block.get("smoothness_degree", 2))
    if mode == "fixed":
        if "n" not in block:
            raise ValidationError("Fixed index needs n", {"field": "problem.index.n"})
        n_eval, text, radial = _lambdify(block["n"], variables, disk)
        return RefractionIndex("fixed", n_eval, None, smoothness, {"n": text}, radial)
    if mode == "k_dependent":
        for key in ("n1", "n2"):
            if key not in block:
                raise ValidationError(f"k_dependent index needs {key}", {"field": f"problem.index.{key}"})
        n1_eval, text1, radial1 = _lambdify(block["n1"], variables, disk)
        n2_eval, text2, radial2 = _lambdify(block["n2"], variables, disk)
        return RefractionIndex("k_dependent", n1_eval, n2_eval, smoothness,
                               {"n1": text1, "n2": text2}, radial1 and radial2)
    raise ValidationError(f"Unknown index mode: {mode}", {"field": "problem.index.mode"})


def check_problem(problem: TransmissionProblem) -> TransmissionProblem:
    """Sampled invariants: n != 0 on the closed domain, n != 1 on the collar, finite a and V"""
    geometry = problem.geometry
    coords = geometry.sample(problem.sample_count)
    n_vals = problem.index.principal(*coords)
    vanishing = np.abs(n_vals) < INDEX_TOLERANCE
    if np.any(vanishing):
        at = [float(c[np.argmax(vanishing)]) for c in coords]
        raise IndexVanishes(f"Refraction index vanishes at {at}", {"point": at})

    collar = geometry.collar_sample(problem.collar_width, problem.sample_count)
    collar_vals = problem.index.principal(*collar)
    ones = np.abs(collar_vals - 1.0) < INDEX_TOLERANCE
    if np.any(ones):
        at = [float(c[np.argmax(ones)]) for c in collar]
        raise IndexOneOnCollar(f"Refraction index equals 1 on the boundary collar at {at}",
                               {"point": at, "collar_width": problem.collar_width})

    a_vals = 1.0 / n_vals
    v_vals = (n_vals - 1.0) / n_vals
    if not (np.all(np.isfinite(a_vals)) and np.all(np.isfinite(v_vals))):
        raise IndexVanishes("Derived coefficients a, V are not finite", {})
    logger.debug(f"Problem checked on {n_vals.size} domain and {collar_vals.size} collar samples")
    return problem


def build_problem(config: Dict[str, Any]) -> TransmissionProblem:
    """Build and check a TransmissionProblem from the `problem` config block"""
    if not isinstance(config, dict) or "geometry" not in config:
        raise ValidationError("Problem block needs a geometry", {"field": "problem.geometry"})
    if "index" not in config:
        raise ValidationError("Problem block needs an index", {"field": "problem.index"})
    geometry = build_geometry(config["geometry"])
    collar_width = float(config.get("collar_width", 0.0))
    if collar_width <= 0:
        raise BadGeometry(f"Collar width must be positive, got {collar_width}",
                          {"field": "problem.collar_width", "collar_width": collar_width})
    index = build_index(config["index"], geometry)
    default_count = MIN_SAMPLES_2D if geometry.dimension == 2 else MIN_SAMPLES_1D
    problem = TransmissionProblem(geometry, index, collar_width,
                                  int(config.get("sample_count", default_count)))
    logger.info(f"Built {geometry.kind} problem with {index.mode} index {index.expressions}")
    return check_problem(problem)


# CONE AND DIRECTIONS
def cone_Ce(problem: TransmissionProblem, sample_count: int = 10000) -> ConeDescription:
    """Angular hull of the directions -conj(1+m(x)) over sampled x"""
    if sample_count < 2:
        raise ValidationError("cone_Ce needs at least 2 samples", {"sample_count": sample_count})
    coords = problem.geometry.sample(sample_count)
    n_vals = problem.index.principal(*coords)
    directions = -np.conj(n_vals)
    # rounding merges directions that differ only by evaluation noise
    angles = np.unique(np.mod(np.round(np.mod(np.angle(directions), 2.0 * np.pi), 12), 2.0 * np.pi))
    if angles.size == 1:
        return ConeDescription(False, (float(angles[0]), float(angles[0])), 0.0)

    gaps = np.diff(np.concatenate([angles, [angles[0] + 2.0 * np.pi]]))
    widest = int(np.argmax(gaps))
    if gaps[widest] < FULL_PLANE_GAP:
        return ConeDescription(True, None, 2.0 * np.pi)
    span = float(2.0 * np.pi - gaps[widest])
    theta1 = float(angles[(widest + 1) % angles.size])
    theta2 = float((theta1 + span) % (2.0 * np.pi))
    return ConeDescription(False, (theta1, theta2), span)


def _angular_distance(a: np.ndarray, b: float) -> np.ndarray:
    d = np.mod(a - b, 2.0 * np.pi)
    return np.minimum(d, 2.0 * np.pi - d)


def admissible_direction(cone: ConeDescription, grid: int = DIRECTION_GRID) -> complex:
    """Unit z0 whose ray is farthest from C_e and from (-inf, 0]; ties go to the smallest angle"""
    if cone.is_full_plane:
        raise NoAdmissibleDirection("The cone C_e is the full plane", {})
    phi = 2.0 * np.pi * np.arange(grid) / grid
    theta1, theta2 = cone.sector
    inside = np.mod(phi - theta1, 2.0 * np.pi) <= cone.span + 1e-12
    to_cone = np.where(inside, 0.0, np.minimum(_angular_distance(phi, theta1), _angular_distance(phi, theta2)))
    distance = np.minimum(to_cone, _angular_distance(phi, np.pi))
    best = int(np.argmax(distance))
    if distance[best] <= 0:
        raise NoAdmissibleDirection("Every grid direction meets C_e or the negative axis", {"grid": grid})
    return complex(np.exp(1j * phi[best]))


def semiclassical_scale(z: complex) -> SemiclassicalPoint:
    z = complex(z)
    if z == 0:
        raise ZeroSpectralParameter("z = 0 has no semiclassical scale", {"z": 0})
    modulus = abs(z)
    return SemiclassicalPoint(z=z, h=modulus ** -0.5, mu=-z / modulus, k=complex(np.sqrt(-z)))
