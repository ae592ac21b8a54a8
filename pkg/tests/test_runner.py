import json

import jsonschema
import pytest

from src.Exceptions import ValidationError
from src.ITEConfig import RunConfig
from src.ITERunner import EXIT_PASS, ITERunner, compare_spectra, constant_index, load_summary_schema
from src.Eigensolve import SpectrumReport


def _run(tmp_path, task, params, problem=None, seed=42):
    data = {"task": task, "output_dir": str(tmp_path / "out"), "seed": seed, "task_params": params}
    if problem is not None:
        data["problem"] = problem
    config = RunConfig.from_dict(data)
    return config, ITERunner(config).run()


def _summary(result):
    with open(result.output_dir / "summary.json", 'r', encoding='utf-8') as f:
        return json.load(f)


def test_identities_run_and_verify(tmp_path):
    config, result = _run(tmp_path, "identities-check", {"instances": 5, "p_max": 3, "size": 8})
    assert result.exit_code == EXIT_PASS
    summary = _summary(result)
    jsonschema.validate(summary, load_summary_schema())
    assert summary["schema"] == "itespec/1"
    assert summary["files"] == ["identities.json"]
    ok, problems = ITERunner(config).verify()
    assert ok, problems


def test_runs_are_deterministic(tmp_path):
    _, first = _run(tmp_path / "a", "identities-check", {"instances": 3, "p_max": 2, "size": 6})
    _, second = _run(tmp_path / "b", "identities-check", {"instances": 3, "p_max": 2, "size": 6})
    assert (first.output_dir / "identities.json").read_bytes() == (second.output_dir / "identities.json").read_bytes()


def test_halfspace_run(tmp_path):
    params = {
        "h_exponents": [4, 5, 6, 7, 8],
        "instances": [
            {"name": "decoupled", "a": 0.5, "V": 0.5, "mu": [-1.0, 0.5], "xi_prime": 1.0, "g": [[1.0, 1.5]]},
            {"name": "quiet", "a": 0.25, "V": 0.75, "mu": -1.0},
        ],
    }
    config, result = _run(tmp_path, "halfspace-verify", params)
    records = {r["name"]: r for r in result.metrics["instances"]}
    assert records["decoupled"]["decoupled_defect"] <= 1e-10
    assert records["quiet"]["exact_match"]
    assert "halfspace_decoupled.csv" in result.files
    ok, problems = ITERunner(config).verify()
    assert ok == result.passed


def test_symbols_run_writes_artifacts(tmp_path):
    problem = {"geometry": {"type": "interval", "a": 0.0, "b": 1.0}, "index": {"mode": "fixed", "n": 4},
               "collar_width": 0.1}
    params = {"root_samples": 200, "quadrature_tuples": 2, "near_confluent": 0, "depth": 2, "mu": -1.0}
    _, result = _run(tmp_path, "symbols-check", params, problem)
    assert set(result.files) == {"kernels.csv", "parametrix_structure.json"}
    assert result.metrics["parametrix"]["structure_pass"]
    assert result.metrics["parametrix"]["composition_residual_zero"]
    assert result.metrics["roots"]["sign_failures"] == 0
    assert result.metrics["ellipticity_margin"] > 0


def test_quasimode_run(tmp_path):
    params = {"potential": "I*x", "x0": 0.0, "xi0": 2.0, "orders": [0, 2], "h_exponents": [4, 5, 6, 7, 8],
              "lower_bound": {"domain": [-1.4, 1.4], "nodes": 320, "h_exponents": [6]}}
    config, result = _run(tmp_path, "quasimode", params)
    assert result.passed
    assert result.metrics["bound_growth_increases"]
    assert result.metrics["lower_bound_verified"] == 1
    assert result.metrics["lower_bound_consistent"]
    assert result.metrics["conjugated"]
    assert sorted(result.files) == ["quasimode.json", "quasimode_K0.dat", "quasimode_K2.dat"]
    ok, problems = ITERunner(config).verify()
    assert ok, problems


def test_verify_without_run(tmp_path):
    config = RunConfig.from_dict({"task": "identities-check", "output_dir": str(tmp_path / "empty")})
    ok, problems = ITERunner(config).verify()
    assert not ok
    assert "missing" in problems[0]


def test_constant_index(interval_problem, absorbing_problem):
    assert constant_index(interval_problem) == 4.0
    assert constant_index(absorbing_problem) is None


def test_compare_spectra_flags_misses_and_spurious_roots():
    region = ((0.0, 10.0), (-2.0, 2.0))
    oracle = SpectrumReport([3.0 + 0j, 5.0 + 0.5j], [1, 1], region, "ContourCount")
    discrete = SpectrumReport([3.0 + 1e-9j, 7.0 + 0j], [1, 1], region, "SigmaMinRefine")
    comparison = compare_spectra(discrete, oracle, region, 0.3, 1e-6)
    assert comparison["compared"] == 2
    assert comparison["matched"] == 1
    assert comparison["spurious"] == []
    discrete.eigenvalues.append(4.0 + 0j)
    discrete.multiplicities.append(1)
    assert compare_spectra(discrete, oracle, region, 0.3, 1e-6)["spurious"] == [4.0 + 0j]


def test_halfspace_geometry_has_no_spectrum(tmp_path):
    problem = {"geometry": {"type": "halfspace", "depth": 1.0}, "index": {"mode": "fixed", "n": 4},
               "collar_width": 0.1}
    with pytest.raises(ValidationError):
        _run(tmp_path, "spectrum", {"region": {"re": [1.0, 2.0], "im": [-0.5, 0.5]}}, problem)


def test_absorbing_spectrum_has_no_real_eigenvalues(tmp_path):
    problem = {"geometry": {"type": "interval", "a": 0.0, "b": 1.0},
               "index": {"mode": "fixed", "n": "4 + I*exp(-50*(x - 0.5)**2)"}, "collar_width": 0.1}
    params = {"region": {"re": [1.0, 5.5], "im": [-2.0, 2.0]}, "resolution": 0.1, "nodes": 32, "oracle": False}
    _, result = _run(tmp_path, "spectrum", params, problem)
    assert result.metrics["real_eigenvalues_under_absorption"] == 0
    assert result.metrics["eigenvalue_count"] > 0
    assert result.metrics["conjugate_symmetric"] is None
    assert "oracle" not in result.metrics


@pytest.mark.slow
def test_disk_spectrum_matches_oracle_over_modes(tmp_path):
    problem = {"geometry": {"type": "disk", "radius": 1.0}, "index": {"mode": "fixed", "n": 4}, "collar_width": 0.1}
    params = {"region": {"re": [1.0, 6.0], "im": [-1.5, 1.5]}, "resolution": 0.1, "nodes": 48,
              "modes": [-10, 10], "oracle": True, "compare_margin": 0.3, "match_tolerance": 1e-6}
    config, result = _run(tmp_path, "spectrum", params, problem)
    oracle = result.metrics["oracle"]
    assert oracle["compared"] > 0
    assert oracle["matched"] == oracle["compared"]
    assert oracle["spurious"] == []
    assert result.passed
    assert "oracle.csv" in result.files
