from pathlib import Path

import pytest
import yaml

from src.Exceptions import ConfigError
from src.ITEConfig import TASKS, RunConfig, SolverSettings, as_complex
from src.LoggingSetup import setup_logging

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

SPECTRUM = {
    "task": "spectrum",
    "output_dir": "out",
    "problem": {"geometry": {"type": "disk", "radius": 1.0}, "index": {"mode": "fixed", "n": 4},
                "collar_width": 0.1},
    "task_params": {"region": {"re": [0.0, 5.0], "im": [-1.0, 1.0]}},
}


def _write(tmp_path, data, name="run.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return path


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.yaml")), ids=lambda p: p.stem)
def test_example_configs_validate(path):
    config = RunConfig.from_file(str(path))
    assert config.task in TASKS


def test_from_file_yaml(tmp_path):
    config = RunConfig.from_file(str(_write(tmp_path, {**SPECTRUM, "seed": 5, "solver": {"threads": 3}})))
    assert config.task == "spectrum"
    assert config.seed == 5
    assert config.solver.threads == 3
    assert config.params("region")["re"] == [0.0, 5.0]
    assert config.params("nodes", 48) == 48


def test_from_file_json(tmp_path):
    path = tmp_path / "run.json"
    path.write_text('{"task": "identities-check", "output_dir": "out"}', encoding="utf-8")
    config = RunConfig.from_file(str(path))
    assert config.problem is None
    assert isinstance(config.solver, SolverSettings)


def test_missing_file():
    with pytest.raises(ConfigError) as info:
        RunConfig.from_file("does/not/exist.yaml")
    assert info.value.details["field"] == "<file>"


def test_unparseable_yaml_reports_line(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("task: spectrum\noutput_dir: [unclosed\n", encoding="utf-8")
    with pytest.raises(ConfigError) as info:
        RunConfig.from_file(str(path))
    assert info.value.details["line"] is not None


def test_unparseable_json_reports_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"task": "spectrum",\n "output_dir": }\n', encoding="utf-8")
    with pytest.raises(ConfigError) as info:
        RunConfig.from_file(str(path))
    assert info.value.details["line"] == 2


def test_empty_and_unknown_format_files(tmp_path):
    empty = tmp_path / "empty.yaml"
    empty.write_text("# nothing here\n", encoding="utf-8")
    with pytest.raises(ConfigError) as info:
        RunConfig.from_file(str(empty))
    assert info.value.details["field"] == "<root>"
    toml = tmp_path / "run.toml"
    toml.write_text('task = "spectrum"\n', encoding="utf-8")
    with pytest.raises(ConfigError) as info:
        RunConfig.from_file(str(toml))
    assert "Unsupported" in str(info.value)


def test_loaded_file_is_schema_checked(tmp_path):
    path = _write(tmp_path, {**SPECTRUM, "task_params": {}})
    with pytest.raises(ConfigError) as info:
        RunConfig.from_file(str(path))
    assert info.value.details["field"] == "task_params.region"
    assert RunConfig.from_file(str(_write(tmp_path, SPECTRUM, "ok.yml"))).source_path.endswith("ok.yml")


def test_missing_geometry_names_field():
    data = {**SPECTRUM, "problem": {"index": {"mode": "fixed", "n": 4}, "collar_width": 0.1}}
    with pytest.raises(ConfigError) as info:
        RunConfig.from_dict(data)
    assert info.value.details["field"] == "problem.geometry"


def test_problem_task_needs_problem():
    data = {key: value for key, value in SPECTRUM.items() if key != "problem"}
    with pytest.raises(ConfigError) as info:
        RunConfig.from_dict(data)
    assert info.value.details["field"] == "problem"


def test_task_params_are_checked():
    data = {**SPECTRUM, "task_params": {"region": {"re": [0.0, 5.0], "im": [-1.0, 1.0]}, "nodez": 3}}
    with pytest.raises(ConfigError):
        RunConfig.from_dict(data)
    data = {**SPECTRUM, "task_params": {}}
    with pytest.raises(ConfigError) as info:
        RunConfig.from_dict(data)
    assert info.value.details["field"] == "task_params.region"


def test_unknown_task_and_solver_setting():
    with pytest.raises(ConfigError) as info:
        RunConfig.from_dict({"task": "nope", "output_dir": "out"})
    assert info.value.details["field"] == "task"
    with pytest.raises(ConfigError) as info:
        RunConfig.from_dict({"task": "identities-check", "output_dir": "out", "solver": {"warp": 9}})
    assert info.value.details["field"] == "solver.warp"


@pytest.mark.parametrize("value, expected", [
    (2, 2 + 0j),
    ("1+2i", 1 + 2j),
    ("-1 - 0.5j", -1 - 0.5j),
    ([0.25, -1.0], 0.25 - 1j),
])
def test_as_complex(value, expected):
    assert as_complex(value) == expected


def test_output_dir_is_created(tmp_path):
    config = RunConfig(task="identities-check", output_dir=str(tmp_path / "a" / "b"))
    assert config.ensure_output_dir().is_dir()


def test_setup_logging_replaces_handlers(tmp_path):
    log_file = tmp_path / "run.log"
    setup_logging(level="debug", log_file=str(log_file))
    logger = setup_logging(level="debug", log_file=str(log_file))
    assert len(logger.handlers) == 2
    logger.warning("collar check skipped")
    for handler in logger.handlers:
        handler.flush()
    text = log_file.read_text(encoding="utf-8")
    assert "[WARNING] itespec: collar check skipped" in text
    setup_logging()
