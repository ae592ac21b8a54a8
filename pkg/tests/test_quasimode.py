import numpy as np
import pytest

from src.Exceptions import NoDecayingBranch, SignConditionFails, SupportLeaksBoundary, ValidationError
from src.Problem import compile_expression
from src.Quasimode import (bound_growth_slopes, build_quasimode, index_for_quasimode, nodes_for_beam,
                           quasimode_lower_bound, quasimode_problem, series_mul, series_power, series_sqrt)

H_GRID = [2.0 ** -e for e in range(4, 11)]
LINEAR = compile_expression("I*x")


@pytest.fixture(scope="module")
def beams():
    return [build_quasimode(LINEAR, 0.0, 2.0, order, H_GRID) for order in (0, 2)]


def test_series_helpers():
    c = np.array([4.0, 4.0, 1.0], dtype=complex)  # (2 + y)^2
    np.testing.assert_allclose(series_sqrt(c, 2.0, 4), [2.0, 1.0, 0.0, 0.0], atol=1e-14)
    inverse = series_power(np.array([2.0, 1.0, 0.0, 0.0], dtype=complex), -1.0, 4)
    np.testing.assert_allclose(series_mul(inverse, np.array([2.0, 1.0, 0.0, 0.0]), 4), [1.0, 0.0, 0.0, 0.0],
                               atol=1e-14)


def test_linear_potential_beam(beams):
    beam = beams[0]
    assert beam.conjugated
    assert beam.z == pytest.approx(4.0)
    assert beam.Q_phase == pytest.approx(0.25j)
    assert beam.h_grid == sorted(H_GRID, reverse=True)
    assert beam.monotone
    assert beam.mass_decay is not None and beam.mass_decay > 0


def test_higher_order_beams_are_sharper(beams):
    low, high = beams
    assert low.slope >= 1.0
    assert high.slope - low.slope >= 0.8
    assert high.residual_ratios[-1] < low.residual_ratios[-1]
    slopes = bound_growth_slopes(beams)
    assert set(slopes) == {0, 2}
    assert slopes[2] > slopes[0]


def test_beam_is_concentrated_at_x0(beams):
    beam = beams[0]
    h = H_GRID[-1]
    x = np.array([0.0, 10.0 * beam.width(h)])
    values = np.abs(beam.evaluate(h, x))
    assert values[1] < 1e-6 * values[0]


def test_build_errors():
    with pytest.raises(NoDecayingBranch):
        build_quasimode(LINEAR, 0.0, 0.0, 0, H_GRID)
    with pytest.raises(SignConditionFails):
        build_quasimode(compile_expression("x"), 0.0, 2.0, 0, H_GRID)
    with pytest.raises(ValidationError):
        build_quasimode(LINEAR, 0.0, 2.0, 5, H_GRID)
    with pytest.raises(SupportLeaksBoundary):
        build_quasimode(LINEAR, 0.0, 2.0, 0, H_GRID, domain=(-0.05, 1.0))


def test_index_for_quasimode(beams):
    n = index_for_quasimode(beams[0], 4.0)
    assert n(np.array([0.0]))[0] == pytest.approx(1.0)
    problem = quasimode_problem(beams[0], (-1.4, 1.4), 4.0)
    assert problem.geometry.a_end == -1.4


def test_lower_bound_stays_below_resolved_scan():
    h_grid = [2.0 ** -6, 2.0 ** -7]
    beam = build_quasimode(LINEAR, 0.0, 2.0, 0, h_grid, domain=(-1.4, 1.4))
    records = quasimode_lower_bound(beam, (-1.4, 1.4), 320, h_grid)
    assert [r.k for r in records] == pytest.approx([128.0, 256.0])
    assert [r.nodes for r in records] == [320, nodes_for_beam(beam, (-1.4, 1.4), 2.0 ** -7, 320)]
    for record in records:
        assert record.verified
        assert np.isfinite(record.scan_value)
        assert record.lower_bound <= record.scan_value
        assert record.consistent
        assert record.discrete_residual_ratio == pytest.approx(record.residual_ratio, rel=0.1)
        assert record.discrete_lower_bound > 0


def test_under_resolved_grid_is_not_verified(monkeypatch):
    monkeypatch.setattr("src.Quasimode.NODES_PER_OSCILLATION", 0.0)
    beam = build_quasimode(LINEAR, 0.0, 2.0, 0, [2.0 ** -7], domain=(-1.4, 1.4))
    record = quasimode_lower_bound(beam, (-1.4, 1.4), 320, [2.0 ** -7])[0]
    assert record.nodes == 320
    assert not record.verified
    assert not record.consistent
