import numpy as np
import pytest
from scipy import special

from src.Discretize import assemble
from src.Eigensolve import (SpectrumReport, assign_multiplicities, bessel_j, counting_function, disk_determinant,
                            find_eigenvalues, interval_determinant, merge_mode_reports, oracle_spectrum,
                            winding_multiplicity)
from src.Exceptions import GridTooFine, IncompleteCoverage, RegionTouchesCone, ValidationError
from src.ITEConfig import SolverSettings
from src.Problem import cone_Ce

DISK_REGION = ((1.0, 5.0), (-1.0, 1.0))


@pytest.fixture(scope="module")
def disk_oracle():
    return oracle_spectrum(lambda k: disk_determinant(4.0, 0, k), DISK_REGION, cell_size=0.25, dimension=2)


@pytest.mark.parametrize("order", [0, 1, 5, 20])
def test_bessel_matches_scipy(order):
    z = np.array([0.1, 1.0 + 0.5j, 7.3 - 2.0j, 25.0 + 1.0j])
    np.testing.assert_allclose(bessel_j(order, z), special.jv(order, z), rtol=1e-10, atol=1e-14)


def test_determinants_reject_trivial_index():
    with pytest.raises(ValidationError):
        disk_determinant(1.0, 0, 2.0)
    with pytest.raises(ValidationError):
        disk_determinant(0.0, 0, 2.0)


def test_interval_determinant_vanishes_at_degenerate_root():
    assert abs(interval_determinant(4.0, 2.0 * np.pi)) < 1e-8


def test_oracle_roots_are_zeros(disk_oracle):
    assert disk_oracle.eigenvalues
    assert disk_oracle.method == "ContourCount"
    for root, mult in zip(disk_oracle.eigenvalues, disk_oracle.multiplicities):
        assert mult == 1
        assert abs(disk_determinant(4.0, 0, root)) < 1e-9
    assert disk_oracle.conjugate_symmetric is not False


def test_discrete_spectrum_matches_oracle(disk_problem, disk_oracle):
    opr = assemble(disk_problem, "tilde", 32, mode=0)
    report = find_eigenvalues(opr, DISK_REGION, 0.1)
    assert report.method == "SigmaMinRefine"
    assert report.dimension == 2
    (x0, x1), (y0, y1) = DISK_REGION
    for root in disk_oracle.eigenvalues:
        if x0 + 0.3 <= root.real <= x1 - 0.3 and y0 + 0.3 <= root.imag <= y1 - 0.3:
            gaps = [abs(root - e) / abs(root) for e in report.eigenvalues]
            assert min(gaps) < 1e-6
    for e in report.eigenvalues:
        assert min(abs(e - root) for root in disk_oracle.eigenvalues) < 1e-4
    assert all(m == 1 for m in report.multiplicities)


def test_winding_multiplicity_at_a_root(disk_problem, disk_oracle):
    opr = assemble(disk_problem, "tilde", 32, mode=0)
    real_roots = [r for r in disk_oracle.eigenvalues if abs(r.imag) < 1e-8]
    assert real_roots
    report = find_eigenvalues(opr, ((real_roots[0].real - 0.2, real_roots[0].real + 0.2), (-0.1, 0.1)), 0.05)
    assert len(report.eigenvalues) == 1
    mult, stable = winding_multiplicity(opr, report.eigenvalues[0], 1e-6)
    assert (mult, stable) == (1, True)


def test_grid_budget(disk_problem):
    opr = assemble(disk_problem, "tilde", 16, mode=0)
    with pytest.raises(GridTooFine):
        find_eigenvalues(opr, DISK_REGION, 0.01, SolverSettings(max_grid_cells=100))


def test_region_touching_cone_is_rejected(interval_problem):
    opr = assemble(interval_problem, "bz", 16)
    with pytest.raises(RegionTouchesCone):
        find_eigenvalues(opr, ((-10.0, -1.0), (-0.5, 0.5)), 0.5, cone=cone_Ce(interval_problem), cone_margin=0.1)


def _report(eigenvalues, multiplicities, region=((0.0, 10.0), (-10.0, 10.0)), dimension=2):
    return SpectrumReport(list(eigenvalues), list(multiplicities), region, "SigmaMinRefine", "k", dimension)


def test_merge_doubles_nonzero_modes():
    merged = merge_mode_reports({0: _report([3.0], [1]), 2: _report([2.0, 4.0 + 1j], [1, 1])})
    assert merged.eigenvalues == [2.0, 3.0, 4.0 + 1j]
    assert merged.multiplicities == [2, 1, 2]
    assert merged.dimension == 2


def test_counting_function():
    report = _report([1.0, 2.0 + 1j, 3.0 - 3.0j, 8.0], [1, 2, 1, 3])
    result = counting_function(report, [1.5, 3.0, 5.0, 10.0])
    assert result.N_values == [1, 3, 4, 7]
    assert report.N_of_t[5.0] == 4
    assert result.C_upper == pytest.approx(max(n / t ** 6 for t, n in zip([1.5, 3.0, 5.0, 10.0], [1, 3, 4, 7])))


def test_counting_needs_coverage():
    report = _report([1.0], [1], region=((0.0, 5.0), (-5.0, 5.0)))
    with pytest.raises(IncompleteCoverage):
        counting_function(report, [1.0, 10.0])
    with pytest.raises(ValidationError):
        counting_function(report, [])


def test_bz_parameter_conversion():
    report = SpectrumReport([-4.0 + 0j], [1], ((-5.0, 0.0), (-1.0, 1.0)), "SigmaMinRefine", "z")
    assert report.k_squared == [4.0]
    assert report.wavenumbers[0] == pytest.approx(2.0)


INTERVAL_REGION = ((1.0, 5.5), (-2.0, 2.0))


def test_interval_spectrum_matches_oracle(interval_problem):
    # cos k = -2 gives the simple complex roots; the double real root at 2 pi lies outside the region
    oracle = oracle_spectrum(lambda k: interval_determinant(4.0, k), INTERVAL_REGION, cell_size=0.25, dimension=1)
    expected = [np.pi + 1j * np.arccosh(2.0), np.pi - 1j * np.arccosh(2.0)]
    assert len(oracle.eigenvalues) == 2
    for root in expected:
        assert min(abs(root - e) for e in oracle.eigenvalues) < 1e-8

    report = find_eigenvalues(assemble(interval_problem, "tilde", 32), INTERVAL_REGION, 0.1)
    assert len(report.eigenvalues) == len(oracle.eigenvalues)
    for root in oracle.eigenvalues:
        assert min(abs(root - e) / abs(root) for e in report.eigenvalues) < 1e-6
    assert report.multiplicities == [1, 1]
    assert report.conjugate_symmetric


def test_nonpositive_winding_is_unresolved(interval_problem):
    opr = assemble(interval_problem, "tilde", 16)
    point = 3.3 + 0.7j
    winding = winding_multiplicity(opr, point, 1e-6)
    assert winding == (0, True)
    report = assign_multiplicities([(point, 1e-12)], [winding], INTERVAL_REGION)
    assert report.eigenvalues == []
    assert not report.multiplicity_stable
    assert any("unresolved" in note for note in report.notes)


def test_unresolved_root_is_dropped_next_to_a_resolved_one():
    roots = [(2.0 + 0.5j, 1e-13), (3.0 + 0.5j, 1e-13)]
    report = assign_multiplicities(roots, [(1, True), (-1, True)], INTERVAL_REGION)
    assert report.eigenvalues == [2.0 + 0.5j]
    assert report.multiplicities == [1]
    assert not report.multiplicity_stable
    assert sum("unresolved" in note for note in report.notes) == 1
