import logging
from typing import Callable, List, Optional, Tuple

import numpy as np

logger = logging.getLogger("itespec")

# largest phase step accepted between neighbouring samples
MAX_PHASE_STEP = np.pi / 4
MAX_REFINE_ROUNDS = 14


class ContourUtils:
    """Argument principle helpers: winding numbers, cell root location, Newton refinement"""

    @staticmethod
    def evaluate(f: Callable, points: np.ndarray, vectorized: bool) -> np.ndarray:
        if vectorized:
            return np.asarray(f(points), dtype=complex)
        return np.array([f(p) for p in points], dtype=complex)

    @staticmethod
    def winding_along(f: Callable, vertices: np.ndarray, vectorized: bool = True,
                      samples_per_edge: int = 8) -> float:
        """
        Total phase change of f along the closed polygon through vertices, divided by 2 pi.
        Each edge is refined until consecutive phase steps stay below MAX_PHASE_STEP.
        """
        vertices = np.asarray(vertices, dtype=complex)
        total = 0.0
        for a, b in zip(vertices, np.roll(vertices, -1)):
            t = np.linspace(0.0, 1.0, samples_per_edge + 1)
            values = ContourUtils.evaluate(f, a + (b - a) * t, vectorized)
            for _ in range(MAX_REFINE_ROUNDS):
                steps = np.angle(values[1:] / values[:-1])
                coarse = np.abs(steps) > MAX_PHASE_STEP
                if not np.any(coarse):
                    break
                mids = 0.5 * (t[:-1][coarse] + t[1:][coarse])
                mid_values = ContourUtils.evaluate(f, a + (b - a) * mids, vectorized)
                t = np.concatenate([t, mids])
                values = np.concatenate([values, mid_values])
                order = np.argsort(t)
                t, values = t[order], values[order]
            else:
                logger.debug(f"Phase refinement hit round limit on edge {a}->{b}")
            total += float(np.sum(np.angle(values[1:] / values[:-1])))
        return total / (2.0 * np.pi)

    @staticmethod
    def rectangle_winding(f: Callable, re_range: Tuple[float, float], im_range: Tuple[float, float],
                          vectorized: bool = True) -> int:
        (x0, x1), (y0, y1) = re_range, im_range
        corners = np.array([complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)])
        return int(round(ContourUtils.winding_along(f, corners, vectorized)))

    @staticmethod
    def circle_winding(f: Callable, center: complex, radius: float, samples: int = 32,
                       vectorized: bool = False) -> int:
        """Winding number of f around a circle, polygonal with `samples` vertices"""
        theta = 2.0 * np.pi * np.arange(samples) / samples
        vertices = center + radius * np.exp(1j * theta)
        return int(round(ContourUtils.winding_along(f, vertices, vectorized, samples_per_edge=2)))

    @staticmethod
    def newton(f: Callable, z0: complex, tol: float = 1e-12, max_iter: int = 60) -> Optional[complex]:
        """Newton iteration with a central-difference derivative; None if it does not settle"""
        z = complex(z0)
        for _ in range(max_iter):
            step_size = 1e-6 * max(1.0, abs(z))
            fz = complex(f(z))
            if fz == 0:
                return z
            df = (complex(f(z + step_size)) - complex(f(z - step_size))) / (2.0 * step_size)
            if df == 0 or not np.isfinite(df):
                return None
            delta = fz / df
            z = z - delta
            if not np.isfinite(z):
                return None
            if abs(delta) < tol * max(1.0, abs(z)):
                return z
        return None

    @staticmethod
    def cell_edges(lo: float, hi: float, cell_size: float, offset: float) -> np.ndarray:
        """Edges lo, lo+offset*c, lo+(offset+1)*c, ..., hi; interior edges avoid round numbers"""
        inner = lo + cell_size * (offset + np.arange(int(np.ceil((hi - lo) / cell_size)) + 1))
        inner = inner[(inner > lo + 1e-12) & (inner < hi - 1e-12)]
        return np.concatenate([[lo], inner, [hi]])

    @staticmethod
    def roots_in_rectangle(f: Callable, re_range: Tuple[float, float], im_range: Tuple[float, float],
                           cell_size: float, tol: float = 1e-12, offset: float = 0.37,
                           max_depth: int = 10) -> List[Tuple[complex, int]]:
        """
        Roots of a vectorized analytic f inside the rectangle, with multiplicities.
        Cells carrying a nonzero winding number are refined by Newton or split.
        """
        found: List[Tuple[complex, int]] = []
        re_edges = ContourUtils.cell_edges(re_range[0], re_range[1], cell_size, offset)
        im_edges = ContourUtils.cell_edges(im_range[0], im_range[1], cell_size, offset)
        for x0, x1 in zip(re_edges[:-1], re_edges[1:]):
            for y0, y1 in zip(im_edges[:-1], im_edges[1:]):
                count = ContourUtils.rectangle_winding(f, (x0, x1), (y0, y1))
                if count > 0:
                    found.extend(ContourUtils._resolve_cell(f, (x0, x1), (y0, y1), count, tol, max_depth))
        return found

    @staticmethod
    def _resolve_cell(f, re_range, im_range, count, tol, depth) -> List[Tuple[complex, int]]:
        (x0, x1), (y0, y1) = re_range, im_range
        center = complex(0.5 * (x0 + x1), 0.5 * (y0 + y1))
        scalar = lambda z: complex(np.asarray(f(np.array([z])))[0])
        if count == 1 or depth == 0:
            root = ContourUtils.newton(scalar, center, tol)
            slack = 1e-9 * max(1.0, abs(center))
            inside = root is not None and (x0 - slack <= root.real <= x1 + slack) and (y0 - slack <= root.imag <= y1 + slack)
            if inside or depth == 0:
                if not inside:
                    logger.warning(f"Newton left cell around {center}; keeping the cell center")
                    root = center
                return [(root, count)]
        # split slightly off the midpoint so a symmetric root does not land on the new edges
        xm = x0 + (0.5 - 0.0123) * (x1 - x0)
        ym = y0 + (0.5 - 0.0123) * (y1 - y0)
        out: List[Tuple[complex, int]] = []
        for sx in ((x0, xm), (xm, x1)):
            for sy in ((y0, ym), (ym, y1)):
                sub = ContourUtils.rectangle_winding(f, sx, sy)
                if sub > 0:
                    out.extend(ContourUtils._resolve_cell(f, sx, sy, sub, tol, depth - 1))
        return out
