import numpy as np
import pytest

from src.Exceptions import (BadGeometry, IndexOneOnCollar, IndexVanishes, NoAdmissibleDirection,
                            ValidationError, ZeroSpectralParameter)
from src.Problem import (ConeDescription, admissible_direction, build_problem, compile_expression, cone_Ce,
                         semiclassical_scale)


def _interval(n, collar=0.1, **index):
    return build_problem({"geometry": {"type": "interval", "a": 0.0, "b": 1.0},
                          "index": {"mode": "fixed", "n": n, **index}, "collar_width": collar})


def test_derived_coefficients(interval_problem):
    x = np.array([0.0, 0.3, 1.0])
    np.testing.assert_allclose(interval_problem.a(x), 0.25)
    np.testing.assert_allclose(interval_problem.V(x), 0.75)
    np.testing.assert_allclose(interval_problem.m(x), 3.0)


def test_vanishing_index_rejected():
    with pytest.raises(IndexVanishes):
        _interval("x")


def test_index_one_on_collar_rejected():
    with pytest.raises(IndexOneOnCollar) as info:
        _interval("1 + x")
    assert info.value.details["collar_width"] == 0.1


def test_bad_geometry():
    with pytest.raises(BadGeometry):
        build_problem({"geometry": {"type": "disk", "radius": -1.0},
                       "index": {"mode": "fixed", "n": 4}, "collar_width": 0.1})
    with pytest.raises(BadGeometry):
        build_problem({"geometry": {"type": "interval", "a": 1.0, "b": 0.0},
                       "index": {"mode": "fixed", "n": 4}, "collar_width": 0.1})
    with pytest.raises(BadGeometry):
        _interval(4, collar=0.0)


def test_missing_geometry_names_field():
    with pytest.raises(ValidationError) as info:
        build_problem({"index": {"mode": "fixed", "n": 4}, "collar_width": 0.1})
    assert info.value.details["field"] == "problem.geometry"


def test_unknown_symbol_in_expression():
    with pytest.raises(ValidationError):
        _interval("4 + t")


def test_k_dependent_index():
    problem = build_problem({"geometry": {"type": "interval", "a": 0.0, "b": 1.0},
                             "index": {"mode": "k_dependent", "n1": 2, "n2": 1}, "collar_width": 0.1})
    x = np.array([0.5])
    assert problem.index.k_dependent
    np.testing.assert_allclose(problem.n(x, k=2.0), 2.0 + 0.5j)
    np.testing.assert_allclose(np.abs(problem.V_at_h0(x)), 0.5)
    with pytest.raises(ValidationError):
        problem.n(x)


def test_disk_radial_flag(disk_problem):
    assert disk_problem.index.radial
    angular = build_problem({"geometry": {"type": "disk", "radius": 1.0},
                             "index": {"mode": "fixed", "n": "4 + x"}, "collar_width": 0.1})
    assert not angular.index.radial


def test_compile_expression_broadcasts():
    f = compile_expression("3")
    out = f(np.linspace(0.0, 1.0, 5))
    assert out.shape == (5,)
    np.testing.assert_allclose(out, 3.0)


def test_cone_of_real_constant_index(interval_problem):
    cone = cone_Ce(interval_problem)
    assert not cone.is_full_plane
    assert cone.span == 0.0
    assert cone.sector[0] == pytest.approx(np.pi)


def test_cone_of_complex_constant_index():
    cone = cone_Ce(_interval("1 + I"))
    assert cone.sector[0] == pytest.approx(3.0 * np.pi / 4.0)


def test_cone_of_absorbing_index_is_a_sector(absorbing_problem):
    cone = cone_Ce(absorbing_problem, sample_count=2000)
    assert not cone.is_full_plane
    assert 0.0 < cone.span < np.pi / 2


def test_admissible_direction_avoids_cone_and_negative_axis(interval_problem):
    z0 = admissible_direction(cone_Ce(interval_problem))
    assert z0 == pytest.approx(1.0)


def test_full_plane_has_no_direction():
    with pytest.raises(NoAdmissibleDirection):
        admissible_direction(ConeDescription(True, None, 2.0 * np.pi))


@pytest.mark.parametrize("z, h, mu", [
    (4.0, 0.5, -1.0),
    (-9.0, 1.0 / 3.0, 1.0),
    (2j, 2.0 ** -0.5, -1j),
])
def test_semiclassical_scale(z, h, mu):
    point = semiclassical_scale(z)
    assert point.h == pytest.approx(h)
    assert point.mu == pytest.approx(mu)
    assert point.k ** 2 == pytest.approx(-z)


def test_semiclassical_scale_rejects_zero():
    with pytest.raises(ZeroSpectralParameter):
        semiclassical_scale(0)
