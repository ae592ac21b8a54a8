import numpy as np

from src.Exceptions import OutOfValidatedRange

MAX_ORDER = 60
MAX_ARGUMENT = 200.0
SERIES_RADIUS = 2.0
_SERIES_TERMS = 40
_RESCALE = 1e200


class BesselUtils:
    """Bessel functions of the first kind, integer order, complex argument"""

    @staticmethod
    def check_range(order: int, z) -> None:
        za = np.abs(np.asarray(z, dtype=complex))
        if order < 0 or order > MAX_ORDER:
            raise OutOfValidatedRange(f"Bessel order {order} outside [0, {MAX_ORDER}]",
                                      {"order": order, "max_order": MAX_ORDER})
        if za.size and float(np.max(za)) > MAX_ARGUMENT:
            raise OutOfValidatedRange(f"Bessel argument |z|={float(np.max(za)):.3g} above {MAX_ARGUMENT}",
                                      {"argument": float(np.max(za)), "max_argument": MAX_ARGUMENT})

    @staticmethod
    def _series(order: int, z: np.ndarray) -> np.ndarray:
        half = z / 2.0
        term = half ** order / float(np.prod(np.arange(1, order + 1, dtype=float)))
        total = term.copy()
        q = -half * half
        for k in range(_SERIES_TERMS):
            term = term * q / ((k + 1) * (order + k + 1))
            total = total + term
        return total

    @staticmethod
    def _miller(top: int, z: np.ndarray) -> np.ndarray:
        """J_0..J_top for each z (|z| >= SERIES_RADIUS) by backward recurrence"""
        zmax = float(np.max(np.abs(z)))
        big = max(top + 1, int(np.ceil(zmax)))
        start = big + 40 + int(np.sqrt(60.0 * big))
        start += start % 2

        values = np.zeros((top + 1, z.size), dtype=complex)
        # e^{-iz} = J0 + 2 sum (-i)^k J_k keeps the sum well conditioned for Im z >= 0
        c = np.where(z.imag >= 0, -1j, 1j)
        target = np.exp(c * z)  # e^{-iz} or e^{iz}

        j_next = np.zeros(z.size, dtype=complex)
        j_curr = np.full(z.size, 1e-30, dtype=complex)
        norm_sum = 2.0 * c ** start * j_curr
        for k in range(start, 0, -1):
            j_prev = (2.0 * k / z) * j_curr - j_next
            j_next, j_curr = j_curr, j_prev
            if k - 1 <= top:
                values[k - 1] = j_curr
            if k - 1 >= 1:
                norm_sum = norm_sum + 2.0 * c ** (k - 1) * j_curr
            else:
                norm_sum = norm_sum + j_curr
            over = np.abs(j_curr) > _RESCALE
            if np.any(over):
                j_curr[over] /= _RESCALE
                j_next[over] /= _RESCALE
                norm_sum[over] /= _RESCALE
                values[:, over] /= _RESCALE
        return values * (target / norm_sum)

    @staticmethod
    def bessel_sequence(top: int, z) -> np.ndarray:
        """Array of shape (top+1,) + z.shape with J_0..J_top"""
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        out = np.zeros((top + 1, flat.size), dtype=complex)
        small = np.abs(flat) < SERIES_RADIUS
        if np.any(small):
            for n in range(top + 1):
                out[n, small] = BesselUtils._series(n, flat[small])
        if np.any(~small):
            out[:, ~small] = BesselUtils._miller(top, flat[~small])
        return out.reshape((top + 1,) + z.shape)

    @staticmethod
    def bessel_j(order: int, z):
        BesselUtils.check_range(order, z)
        values = BesselUtils.bessel_sequence(order, z)[order]
        return values if np.ndim(values) else complex(values)

    @staticmethod
    def bessel_j_and_derivative(order: int, z):
        """(J_m(z), J_m'(z)) with J_m' = (J_{m-1} - J_{m+1})/2 and J_{-1} = -J_1"""
        BesselUtils.check_range(order, z)
        seq = BesselUtils.bessel_sequence(order + 1, z)
        lower = seq[order - 1] if order >= 1 else -seq[1]
        value = seq[order]
        deriv = 0.5 * (lower - seq[order + 1])
        if np.ndim(value) == 0:
            return complex(value), complex(deriv)
        return value, deriv
