import numpy as np
import pytest

from src.Exceptions import (BoundarySystemMismatch, DegenerateCompanionMatrix, FitUnstable, NonDecayingData,
                            ValidationError)
from src.HalfSpace import (ExponentialProfile, HalfSpaceInstance, boundary_rows, convergence_study,
                           exact_halfspace_solution, symbol_predicted_traces, trace_slots)
from src.Symbols import TraceSymbolSystem, trace_kernel4

H_GRID = [2.0 ** -e for e in range(4, 11)]


def _instance(h=2.0 ** -6, **changes):
    values = dict(a_val=0.25, V_val=0.75, mu=-1.0, xi_prime=0.5, h=h,
                  f_profile=ExponentialProfile((1.0,), (2.0,)), g_profile=ExponentialProfile((1.0,), (1.0,)),
                  name="coupled")
    values.update(changes)
    return HalfSpaceInstance(**values)


def test_exact_solution_satisfies_the_model():
    solution = exact_halfspace_solution(_instance())
    x = np.linspace(0.0, 0.5, 41)
    assert solution.ode_residual(x) < 1e-10
    u0, du0 = solution.boundary_values()
    assert abs(u0) < 1e-12 and abs(du0) < 1e-12
    # decay at infinity
    assert np.max(np.abs(solution.evaluate(np.array([40.0])))) < 1e-12


def test_unfrozen_prediction_is_exact():
    inst = _instance()
    exact = exact_halfspace_solution(inst).traces()
    predicted = symbol_predicted_traces(inst, freeze_data=False)
    assert predicted == pytest.approx(exact, rel=1e-8, abs=1e-14)


def test_frozen_prediction_converges():
    fit = convergence_study(_instance(), H_GRID)
    assert len(fit.rows) == len(H_GRID)
    assert fit.slope1 is not None and fit.slope1 > 1.0
    errors = [max(r[1], r[2]) for r in fit.rows]
    assert errors[0] < errors[-1]


def test_zero_data_is_an_exact_match():
    inst = _instance(f_profile=ExponentialProfile(), g_profile=ExponentialProfile())
    with pytest.raises(FitUnstable) as info:
        convergence_study(inst, H_GRID)
    assert info.value.details["exact_match"] is True


def test_h_grid_must_be_dyadic_and_long_enough():
    with pytest.raises(ValidationError):
        convergence_study(_instance(), [0.01, 0.02, 0.03, 0.04, 0.05])
    with pytest.raises(ValidationError):
        convergence_study(_instance(), H_GRID[:3])


def test_equal_coefficients_collide():
    with pytest.raises(DegenerateCompanionMatrix):
        exact_halfspace_solution(_instance(a_val=1.0))


def test_growing_data_rejected():
    with pytest.raises(NonDecayingData):
        ExponentialProfile((1.0,), (-1.0,))


def test_boundary_rows_rebuild_the_symbol_system():
    roots = _instance().roots()
    rows = boundary_rows(roots)
    np.testing.assert_allclose(rows, TraceSymbolSystem.from_roots(roots).matrix, rtol=1e-12, atol=1e-12)


def test_prediction_is_checked_against_kernel_rows(monkeypatch):
    inst = _instance()
    gamma0, gamma1 = symbol_predicted_traces(inst)
    slots = trace_slots(inst)
    rows = boundary_rows(inst.roots())
    np.testing.assert_allclose(rows @ np.array([gamma0, gamma1]), [slots.g2, slots.g6], rtol=1e-9, atol=1e-12)

    monkeypatch.setattr("src.HalfSpace.trace_kernel4", lambda *args: 1.5 * trace_kernel4(*args))
    with pytest.raises(BoundarySystemMismatch):
        symbol_predicted_traces(inst)


def test_slots_scale_linearly_with_data():
    inst = _instance()
    base = trace_slots(inst)
    doubled = trace_slots(inst.scaled(2.0))
    assert doubled.g7 == pytest.approx(2.0 * base.g7)


def test_from_config_accepts_pairs():
    inst = HalfSpaceInstance.from_config({"name": "absorbing", "a": [0.2, -0.05], "V": 0.75, "mu": [-1.0, 0.0],
                                          "xi_prime": 0.5, "g": [[1.0, [1.0, 0.5]]]}, h=2.0 ** -5)
    assert inst.a_val == 0.2 - 0.05j
    assert inst.g_profile.rates == (1.0 + 0.5j,)
    assert inst.name == "absorbing"
