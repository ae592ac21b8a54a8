import numpy as np
import pytest

from src.Exceptions import IllConditioned, ValidationError
from src.OperatorIdentities import (OperatorAlgebraInstance, check_product_identity, check_resolvent_combination,
                                    counting_chain_check, eigen_configuration, eigenvalue_form_check, error_growth,
                                    hs_eigenvalue_bound, roots_of_unity, run_identity_batch)


@pytest.mark.parametrize("p", [1, 2, 3, 6])
def test_roots_of_unity(p):
    omega = roots_of_unity(p)
    assert omega[-1] == pytest.approx(1.0)
    np.testing.assert_allclose(omega ** p, 1.0, atol=1e-12)
    if p > 1:
        assert abs(omega.sum()) < 1e-12


def test_identities_on_random_instances(rng):
    for p in (1, 2, 4):
        inst = OperatorAlgebraInstance.random(rng, 12, p, norm=0.5)
        assert check_product_identity(inst).passed
        assert check_resolvent_combination(inst).passed
        chain = counting_chain_check(inst.S, inst.p, inst.z)
        assert chain["pass"]


def test_hilbert_schmidt_bound(rng):
    T = rng.standard_normal((10, 10)) + 1j * rng.standard_normal((10, 10))
    total, frobenius, ok = hs_eigenvalue_bound(T)
    assert ok
    assert total <= frobenius + 1e-8
    # equality for normal matrices
    total, frobenius, _ = hs_eigenvalue_bound(np.diag([1.0, 2.0j, -3.0]))
    assert total == pytest.approx(frobenius)


def test_instance_validation():
    with pytest.raises(ValidationError):
        OperatorAlgebraInstance(np.eye(3), 0, 1.0)
    with pytest.raises(ValidationError):
        OperatorAlgebraInstance(np.ones((2, 3)), 2, 1.0)


def test_singular_factor_is_ill_conditioned():
    inst = OperatorAlgebraInstance(np.eye(3, dtype=complex), 2, 1.0)
    with pytest.raises(IllConditioned):
        check_product_identity(inst)


@pytest.mark.parametrize("block", [1, 2, 3])
def test_jordan_block_stabilization(rng, block):
    S, vec = eigen_configuration(rng, 3, np.exp(0.4j), 2, size=6, block=block)
    report = eigenvalue_form_check(S, 3, np.exp(0.4j), vec)
    assert report["pass"]
    assert report["stabilization_index"] == block
    assert report["eigenvector_in_kernel"]


def test_jordan_block_must_fit(rng):
    with pytest.raises(ValidationError):
        eigen_configuration(rng, 2, 1.0, 1, size=3, block=4)


def test_batch_is_seeded():
    first = run_identity_batch(10, seed=42, p_max=3, size=8)
    second = run_identity_batch(10, seed=42, p_max=3, size=8)
    assert first == second
    assert [r["identity"] for r in first] == ["product", "resolvent_combination", "hs_eigenvalue_bound",
                                              "counting_chain", "jordan_stabilization"]
    assert all(r["pass"] for r in first)


def test_error_growth_is_moderate():
    assert error_growth(7, p=2, size=8, instances=5) < 16.0
