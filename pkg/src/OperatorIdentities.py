import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg as spl

from src.Exceptions import EigenExtractionUnstable, IllConditioned, ValidationError

logger = logging.getLogger("itespec")

MAX_SIZE = 64
CONDITION_LIMIT = 1e12
EIGENVECTOR_CONDITION_LIMIT = 1e10
PRODUCT_TOLERANCE = 1e-10
COMBINATION_TOLERANCE = 1e-9
HS_TOLERANCE = 1e-8
RANK_TOLERANCE = 1e-8
MAX_RESAMPLES = 50


def roots_of_unity(p: int) -> np.ndarray:
    """omega_j = exp(2 pi i j / p), j = 1..p"""
    return np.exp(2j * np.pi * np.arange(1, p + 1) / p)


@dataclass(frozen=True)
class OperatorAlgebraInstance:
    S: np.ndarray
    p: int
    z: complex

    def __post_init__(self):
        if self.p < 1:
            raise ValidationError("p must be at least 1", {"p": self.p})
        if self.S.ndim != 2 or self.S.shape[0] != self.S.shape[1] or self.S.shape[0] > MAX_SIZE:
            raise ValidationError(f"S must be square with size <= {MAX_SIZE}", {"shape": list(self.S.shape)})

    @property
    def size(self) -> int:
        return self.S.shape[0]

    @property
    def omega(self) -> np.ndarray:
        return roots_of_unity(self.p)

    @property
    def scale(self) -> float:
        return float((1.0 + abs(self.z) * np.linalg.norm(self.S, 2)) ** self.p)

    def factor(self, lam: complex) -> np.ndarray:
        return np.eye(self.size) - lam * self.S

    def check_conditioning(self) -> None:
        """(I - omega_j z S) and (I - z^p S^p) must all be invertible"""
        factors = [(f"omega_{j + 1}", self.factor(w * self.z)) for j, w in enumerate(self.omega)]
        factors.append(("power", np.eye(self.size) - self.z ** self.p * np.linalg.matrix_power(self.S, self.p)))
        for name, M in factors:
            cond = np.linalg.cond(M)
            if not cond < CONDITION_LIMIT:
                raise IllConditioned(f"Factor {name} has condition {cond:.3e}", {"factor": name, "condition": float(cond)})

    @classmethod
    def random(cls, rng: np.random.Generator, size: int, p: int, norm: float = 0.8) -> 'OperatorAlgebraInstance':
        S = (rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))) / np.sqrt(2.0 * size)
        S *= norm / max(np.linalg.norm(S, 2), 1e-300)
        z = complex(rng.uniform(0.2, 1.5) * np.exp(2j * np.pi * rng.uniform()))
        return cls(S, int(p), z)


@dataclass
class IdentityCheck:
    identity: str
    error: float
    tolerance: float
    passed: bool

    def to_dict(self) -> Dict:
        return {"identity": self.identity, "error": self.error, "tolerance": self.tolerance, "pass": self.passed}


def check_product_identity(inst: OperatorAlgebraInstance) -> IdentityCheck:
    """max |(I - z^p S^p) - prod_j (I - omega_j z S)|"""
    inst.check_conditioning()
    lhs = np.eye(inst.size) - inst.z ** inst.p * np.linalg.matrix_power(inst.S, inst.p)
    rhs = np.eye(inst.size, dtype=complex)
    for w in inst.omega:
        rhs = rhs @ inst.factor(w * inst.z)
    error = float(np.max(np.abs(lhs - rhs)))
    tolerance = PRODUCT_TOLERANCE * inst.scale
    return IdentityCheck("product", error, tolerance, error <= tolerance)


def _lambda_resolvent(M: np.ndarray, lam: complex) -> np.ndarray:
    """M_lambda = M (I - lambda M)^-1"""
    return M @ np.linalg.inv(np.eye(M.shape[0]) - lam * M)


def check_resolvent_combination(inst: OperatorAlgebraInstance) -> IdentityCheck:
    """p z^(p-1) T_{z^p} = sum_k omega_k S_{omega_k z}, T = S^p; error relative to the largest term"""
    inst.check_conditioning()
    T = np.linalg.matrix_power(inst.S, inst.p)
    lhs = inst.p * inst.z ** (inst.p - 1) * _lambda_resolvent(T, inst.z ** inst.p)
    terms = [w * _lambda_resolvent(inst.S, w * inst.z) for w in inst.omega]
    rhs = sum(terms)
    size = max(float(np.max(np.abs(t))) for t in terms)
    error = float(np.max(np.abs(lhs - rhs)) / max(size, 1e-300))
    return IdentityCheck("resolvent_combination", error, COMBINATION_TOLERANCE, error <= COMBINATION_TOLERANCE)


def hs_eigenvalue_bound(T: np.ndarray) -> Tuple[float, float, bool]:
    """(sum |mu_i|^2, ||T||_F^2, sum <= ||T||_F^2 + 1e-8)"""
    mu = spl.eigvals(T)
    total = float(np.sum(np.abs(mu) ** 2))
    frobenius = float(np.linalg.norm(T, "fro") ** 2)
    return total, frobenius, total <= frobenius + HS_TOLERANCE


def counting_chain_check(S: np.ndarray, p: int, z: complex) -> Dict[str, object]:
    """
    sum_j 1/|lambda_j^p - z^p|^2 <= ||T_{z^p}||_F^2 with T = S^p and 1/lambda_j the nonzero
    eigenvalues of S.
    """
    values, vectors = spl.eig(S)
    cond = float(np.linalg.cond(vectors))
    if not cond < EIGENVECTOR_CONDITION_LIMIT:
        raise EigenExtractionUnstable(f"Eigenvector matrix condition {cond:.3e}", {"condition": cond})
    zp = complex(z) ** p
    nonzero = np.abs(values) > 1e-14 * max(1.0, float(np.max(np.abs(values))))
    lam = 1.0 / values[nonzero]
    gaps = np.abs(lam ** p - zp)
    if np.any(gaps < 1e-8 * max(1.0, abs(zp))):
        raise EigenExtractionUnstable("z^p collides with an eigenvalue power", {"min_gap": float(np.min(gaps))})
    lhs = float(np.sum(1.0 / gaps ** 2))
    T = np.linalg.matrix_power(S, p)
    T_zp = _lambda_resolvent(T, zp)
    rhs = float(np.linalg.norm(T_zp, "fro") ** 2)
    return {"lhs": lhs, "rhs": rhs, "margin": rhs - lhs, "pass": lhs <= rhs * (1.0 + 1e-10) + HS_TOLERANCE,
            "eigenvector_condition": cond}


def _kernel(M: np.ndarray) -> np.ndarray:
    """Orthonormal kernel basis by SVD with a relative rank threshold"""
    U, s, Vh = np.linalg.svd(M)
    threshold = RANK_TOLERANCE * max(1.0, float(s[0]) if s.size else 1.0)
    rank = int(np.sum(s > threshold))
    return Vh[rank:].conj().T


def eigenvalue_form_check(S: np.ndarray, p: int, z: complex, eigenvector: Optional[np.ndarray] = None) -> Dict[str, object]:
    """
    Kernel dimensions of (I - z^p S^p)^k up to the matrix size, the stabilisation index, and
    ker(I - z^p S^p)^K = sum_j ker(I - omega_j z S)^K at the stabilised power K.
    """
    n = S.shape[0]
    I = np.eye(n)
    A = I - complex(z) ** p * np.linalg.matrix_power(S, p)
    dims = [int(_kernel(np.linalg.matrix_power(A, k)).shape[1]) for k in range(1, n + 1)]
    stabilization = next((k + 1 for k in range(n - 1) if dims[k] == dims[k + 1]), n)
    if dims[0] == 0:
        stabilization = 0
    K = max(stabilization, 1)
    AK = np.linalg.matrix_power(A, K)
    pieces = [_kernel(np.linalg.matrix_power(I - w * z * S, K)) for w in roots_of_unity(p)]
    piece_dims = [int(b.shape[1]) for b in pieces]
    contained = all(b.shape[1] == 0 or np.max(np.abs(AK @ b)) <= 1e-8 * max(1.0, np.linalg.norm(AK, 2))
                    for b in pieces)
    eigenvector_ok = None
    if eigenvector is not None:
        v = np.asarray(eigenvector, dtype=complex)
        eigenvector_ok = bool(np.linalg.norm(A @ v) <= 1e-8 * max(1.0, np.linalg.norm(v)))
    passed = contained and sum(piece_dims) == dims[K - 1] and eigenvector_ok is not False
    return {"kernel_dims": dims, "stabilization_index": stabilization, "piece_dims": piece_dims,
            "contained": contained, "eigenvector_in_kernel": eigenvector_ok, "pass": bool(passed)}


def _random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def eigen_configuration(rng: np.random.Generator, p: int, z: complex, j: int, size: int = 6,
                        block: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """
    S = Q J Q^H with a Jordan block of the given size at 1/(omega_j z) and the remaining
    eigenvalues kept away from every 1/(omega_k z). Returns (S, eigenvector).
    """
    if not 1 <= block <= size:
        raise ValidationError("Jordan block must fit in the matrix", {"block": block, "size": size})
    target = 1.0 / (roots_of_unity(p)[j - 1] * complex(z))
    avoid = 1.0 / (roots_of_unity(p) * complex(z))
    J = np.zeros((size, size), dtype=complex)
    for i in range(block):
        J[i, i] = target
        if i + 1 < block:
            J[i, i + 1] = 1.0
    for i in range(block, size):
        while True:
            value = complex(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)) * abs(target)
            if np.min(np.abs(value - avoid)) > 0.1 * abs(target):
                break
        J[i, i] = value
    Q = _random_unitary(rng, size)
    return Q @ J @ Q.conj().T, Q[:, 0]


def run_identity_batch(count: int, seed: int, p_max: int = 6, size: int = 32) -> List[Dict[str, object]]:
    """Seeded random instances; ill-conditioned draws are resampled. JSON-ready records per identity."""
    rng = np.random.default_rng(seed)
    errors = {"product": [], "resolvent_combination": [], "hs_eigenvalue_bound": [], "counting_chain": []}
    passes = {key: True for key in errors}
    for _ in range(count):
        for _ in range(MAX_RESAMPLES):
            inst = OperatorAlgebraInstance.random(rng, size, int(rng.integers(1, p_max + 1)))
            try:
                product = check_product_identity(inst)
                combination = check_resolvent_combination(inst)
                chain = counting_chain_check(inst.S, inst.p, inst.z)
                break
            except (IllConditioned, EigenExtractionUnstable) as e:
                logger.debug(f"Resampling instance: {e.message}")
        else:
            raise IllConditioned("No well-conditioned instance after resampling", {"attempts": MAX_RESAMPLES})
        total, frobenius, hs_ok = hs_eigenvalue_bound(np.linalg.matrix_power(inst.S, inst.p))
        errors["product"].append(product.error / inst.scale)
        errors["resolvent_combination"].append(combination.error)
        errors["hs_eigenvalue_bound"].append(max(total - frobenius, 0.0))
        errors["counting_chain"].append(max(-chain["margin"], 0.0))
        passes["product"] &= product.passed
        passes["resolvent_combination"] &= combination.passed
        passes["hs_eigenvalue_bound"] &= hs_ok
        passes["counting_chain"] &= bool(chain["pass"])

    records = [{"identity": key, "instances": count, "max_error": float(max(values) if values else 0.0),
                "pass": bool(passes[key])} for key, values in errors.items()]

    jordan_ok, jordan_cases = True, 0
    for block in range(1, 5):
        p = int(rng.integers(1, p_max + 1))
        z = complex(np.exp(2j * np.pi * rng.uniform()))
        j = int(rng.integers(1, p + 1))
        S, vec = eigen_configuration(rng, p, z, j, size=max(block + 2, 6), block=block)
        report = eigenvalue_form_check(S, p, z, vec)
        jordan_ok &= report["pass"] and report["stabilization_index"] == block
        jordan_cases += 1
    records.append({"identity": "jordan_stabilization", "instances": jordan_cases, "max_error": 0.0,
                    "pass": bool(jordan_ok)})
    logger.info(f"Identity batch of {count} instances (seed {seed}): "
                f"{'all pass' if all(r['pass'] for r in records) else 'failures'}")
    return records


def error_growth(seed: int, p: int = 3, size: int = 16, instances: int = 20) -> float:
    """Mean scaled product error at 2*size over that at size"""
    rng = np.random.default_rng(seed)

    def mean_error(n):
        values = []
        while len(values) < instances:
            inst = OperatorAlgebraInstance.random(rng, n, p)
            try:
                values.append(check_product_identity(inst).error / inst.scale)
            except IllConditioned:
                continue
        return float(np.mean(values)) + 1e-17

    return mean_error(2 * size) / mean_error(size)
