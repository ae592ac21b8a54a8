import numpy as np
from numpy.polynomial import chebyshev as C


class ChebyshevUtils:
    """Chebyshev collocation matrices and quadrature weights"""

    @staticmethod
    def chebdiff(N: int):
        """
        x, D = chebdiff(N)
        N - polynomial degree, returns N+1 Gauss-Lobatto points x_j = cos(pi j/N)
        D - first-derivative collocation matrix on those points (descending order)
        """
        if N == 0:
            return np.array([1.0]), np.zeros((1, 1))
        n = np.arange(0, N + 1)
        x = np.cos(np.pi * n / N)
        c = np.hstack((2, np.ones(N - 1), 2)) * (-1.0) ** n
        X = np.tile(x, (N + 1, 1)).T
        dX = X - X.T
        D = np.outer(c, 1.0 / c) / (dX + np.eye(N + 1))
        D = D - np.diag(D.sum(axis=1))
        return x, D

    @staticmethod
    def clenshaw_curtis_weights(N: int) -> np.ndarray:
        """Weights on [-1, 1] for the N+1 points cos(pi j/N); positive, sum to 2"""
        theta = np.pi * np.arange(N + 1) / N
        w = np.zeros(N + 1)
        v = np.ones(N - 1)
        inner = theta[1:-1]
        if N % 2 == 0:
            w[0] = w[N] = 1.0 / (N ** 2 - 1)
            for k in range(1, N // 2):
                v -= 2.0 * np.cos(2 * k * inner) / (4 * k ** 2 - 1)
            v -= np.cos(N * inner) / (N ** 2 - 1)
        else:
            w[0] = w[N] = 1.0 / N ** 2
            for k in range(1, (N - 1) // 2 + 1):
                v -= 2.0 * np.cos(2 * k * inner) / (4 * k ** 2 - 1)
        w[1:-1] = 2.0 * v / N
        return w

    @staticmethod
    def interval_operators(a: float, b: float, N: int):
        """
        Ascending nodes on [a, b] with D1, D2 and Clenshaw-Curtis weights.
        N is the number of nodes.
        """
        x, D = ChebyshevUtils.chebdiff(N - 1)
        x = x[::-1]
        D = D[::-1, ::-1]
        scale = 2.0 / (b - a)
        nodes = a + (x + 1.0) * (b - a) / 2.0
        D1 = D * scale
        D2 = D1 @ D1
        weights = ChebyshevUtils.clenshaw_curtis_weights(N - 1)[::-1] * (b - a) / 2.0
        return nodes, D1, D2, weights

    @staticmethod
    def radial_operators(radius: float, N: int, m: int = 0):
        """
        Radial nodes on (0, R] from the even/odd folding of 2N Chebyshev points on [-R, R].
        No node sits at r = 0; the fold uses the parity (-1)^m of mode m.
        Returns descending nodes r, folded D1, D2 and area weights for the disk.
        """
        M = 2 * N - 1
        x, D = ChebyshevUtils.chebdiff(M)
        D2 = D @ D
        parity = (-1.0) ** abs(m)
        D1_f = D[:N, :N] + parity * D[:N, N:][:, ::-1]
        D2_f = D2[:N, :N] + parity * D2[:N, N:][:, ::-1]
        r = radius * x[:N]
        D1_f = D1_f / radius
        D2_f = D2_f / radius ** 2
        return r, D1_f, D2_f, ChebyshevUtils.disk_weights(r, radius)

    @staticmethod
    def disk_weights(r: np.ndarray, radius: float) -> np.ndarray:
        """
        Area weights for radial functions on the disk, interpolatory in t = 2r^2/R^2 - 1.
        The integral of f over the disk is (pi R^2 / 2) times the integral over t in [-1, 1].
        """
        t = 2.0 * (r / radius) ** 2 - 1.0
        n = len(t)
        V = C.chebvander(t, n - 1).T
        moments = np.zeros(n)
        for i in range(0, n, 2):
            moments[i] = 2.0 / (1.0 - i ** 2)
        w = np.linalg.solve(V, moments)
        return np.real(w) * np.pi * radius ** 2 / 2.0
