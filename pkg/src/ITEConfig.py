import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional
from pathlib import Path
import jsonschema
import yaml

from src.Exceptions import ConfigError

logger = logging.getLogger("itespec")

SCHEMA_VERSION = "itespec/1"

TASKS = (
    "spectrum",
    "counting",
    "pseudospectrum",
    "bound-fit",
    "quasimode",
    "halfspace-verify",
    "symbols-check",
    "identities-check",
)

# tasks that cannot run without a problem block
PROBLEM_TASKS = ("spectrum", "counting", "pseudospectrum", "bound-fit")
YAML_SUFFIXES = (".yaml", ".yml")
JSON_SUFFIXES = (".json",)


# SCHEMAS
_NUMBER = {"type": "number"}
_COMPLEX = {
    "oneOf": [
        {"type": "number"},
        {"type": "string"},
        {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
    ]
}
_EXPR = {"oneOf": [{"type": "number"}, {"type": "string"}]}
_PAIR = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_REGION = {
    "type": "object",
    "required": ["re", "im"],
    "properties": {"re": _PAIR, "im": _PAIR},
    "additionalProperties": False,
}
_RESOLUTION = {
    "oneOf": [
        {"type": "number", "exclusiveMinimum": 0},
        {
            "type": "object",
            "required": ["re_step", "im_step"],
            "properties": {
                "re_step": {"type": "number", "exclusiveMinimum": 0},
                "im_step": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
    ]
}
_EXPONENTS = {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1}
_PROFILE = {"type": "array", "items": {"type": "array", "items": _COMPLEX, "minItems": 2, "maxItems": 2}}

PROBLEM_SCHEMA = {
    "type": "object",
    "required": ["geometry", "index", "collar_width"],
    "properties": {
        "geometry": {
            "type": "object",
            "required": ["type"],
            "properties": {
                "type": {"enum": ["interval", "disk", "halfspace"]},
                "a": _NUMBER,
                "b": _NUMBER,
                "radius": _NUMBER,
                "depth": _NUMBER,
            },
            "additionalProperties": False,
        },
        "index": {
            "type": "object",
            "required": ["mode"],
            "properties": {
                "mode": {"enum": ["fixed", "k_dependent"]},
                "n": _EXPR,
                "n1": _EXPR,
                "n2": _EXPR,
                "smoothness_degree": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "collar_width": _NUMBER,
        "sample_count": {"type": "integer", "minimum": 2},
    },
    "additionalProperties": False,
}

BASE_SCHEMA = {
    "type": "object",
    "required": ["task", "output_dir"],
    "properties": {
        "task": {"enum": list(TASKS)},
        "problem": PROBLEM_SCHEMA,
        "task_params": {"type": "object"},
        "output_dir": {"type": "string"},
        "seed": {"type": "integer"},
        "solver": {"type": "object"},
        "log_level": {"enum": ["DEBUG", "INFO", "WARNING", "ERROR"]},
    },
    "additionalProperties": False,
}

TASK_SCHEMAS: Dict[str, Dict[str, Any]] = {
    "spectrum": {
        "type": "object",
        "required": ["region"],
        "properties": {
            "nodes": {"type": "integer", "minimum": 1},
            "region": _REGION,
            "resolution": _RESOLUTION,
            "modes": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
            "oracle": {"type": "boolean"},
            "compare_margin": {"type": "number", "minimum": 0},
            "match_tolerance": {"type": "number", "exclusiveMinimum": 0},
            "cone_margin": {"type": "number", "minimum": 0},
            "dump_matrix_at": _COMPLEX,
        },
        "additionalProperties": False,
    },
    "counting": {
        "type": "object",
        "required": ["region", "t_max"],
        "properties": {
            "source": {"enum": ["oracle", "discrete"]},
            "region": _REGION,
            "t_max": {"type": "number", "exclusiveMinimum": 0},
            "t_count": {"type": "integer", "minimum": 2},
            "cell_size": {"type": "number", "exclusiveMinimum": 0},
            "nodes": {"type": "integer", "minimum": 1},
            "resolution": _RESOLUTION,
            "modes": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
            "slope_range": _PAIR,
        },
        "additionalProperties": False,
    },
    "pseudospectrum": {
        "type": "object",
        "required": ["region"],
        "properties": {
            "nodes": {"type": "integer", "minimum": 1},
            "region": _REGION,
            "resolution": _RESOLUTION,
            "mode": {"type": "integer"},
            "doubling_points": {"type": "integer", "minimum": 0},
            "max_change": {"type": "number", "exclusiveMinimum": 0},
        },
        "additionalProperties": False,
    },
    "bound-fit": {
        "type": "object",
        "properties": {
            "nodes": {"type": "integer", "minimum": 1},
            "k_start": {"type": "number", "exclusiveMinimum": 0},
            "k_stop": {"type": "number", "exclusiveMinimum": 0},
            "k_step": {"type": "number", "exclusiveMinimum": 0},
            "green": {
                "type": "object",
                "properties": {
                    "delta": {"type": "number", "exclusiveMinimum": 0},
                    "ks": {"type": "array", "items": _NUMBER, "minItems": 1},
                    "instances": {"type": "integer", "minimum": 0},
                    "nodes": {"type": "integer", "minimum": 1},
                },
                "additionalProperties": False,
            },
        },
        "additionalProperties": False,
    },
    "quasimode": {
        "type": "object",
        "required": ["potential", "x0", "xi0"],
        "properties": {
            "potential": _EXPR,
            "x0": _NUMBER,
            "xi0": _NUMBER,
            "orders": {"type": "array", "items": {"type": "integer", "minimum": 0, "maximum": 4}, "minItems": 1},
            "h_exponents": _EXPONENTS,
            "min_slope": _NUMBER,
            "min_slope_gain": _NUMBER,
            "lower_bound": {
                "type": "object",
                "properties": {
                    "domain": _PAIR,
                    "nodes": {"type": "integer", "minimum": 1},
                    "h_exponents": _EXPONENTS,
                    "scale": {"type": "number", "exclusiveMinimum": 0},
                    "collar_width": {"type": "number", "exclusiveMinimum": 0},
                },
                "additionalProperties": False,
            },
        },
        "additionalProperties": False,
    },
    "halfspace-verify": {
        "type": "object",
        "required": ["instances"],
        "properties": {
            "h_exponents": _EXPONENTS,
            "min_slope": _NUMBER,
            "instances": {
                "type": "array",
                "minItems": 1,
                "items": {
                    "type": "object",
                    "required": ["name", "mu"],
                    "properties": {
                        "name": {"type": "string"},
                        "a": _COMPLEX,
                        "V": _COMPLEX,
                        "mu": _COMPLEX,
                        "xi_prime": _NUMBER,
                        "f": _PROFILE,
                        "g": _PROFILE,
                    },
                    "additionalProperties": False,
                },
            },
        },
        "additionalProperties": False,
    },
    "symbols-check": {
        "type": "object",
        "properties": {
            "root_samples": {"type": "integer", "minimum": 0},
            "quadrature_tuples": {"type": "integer", "minimum": 0},
            "near_confluent": {"type": "integer", "minimum": 0},
            "depth": {"type": "integer", "minimum": 0, "maximum": 8},
            "mu": _COMPLEX,
            "xi_max": {"type": "number", "exclusiveMinimum": 0},
        },
        "additionalProperties": False,
    },
    "identities-check": {
        "type": "object",
        "properties": {
            "instances": {"type": "integer", "minimum": 1},
            "p_max": {"type": "integer", "minimum": 1, "maximum": 12},
            "size": {"type": "integer", "minimum": 1, "maximum": 64},
        },
        "additionalProperties": False,
    },
}


def as_complex(value: Any) -> complex:
    """Config complex: number, "1+2j" string or [re, im] pair"""
    if isinstance(value, (list, tuple)):
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, str):
        return complex(value.replace(" ", "").replace("i", "j").replace("I", "j"))
    return complex(value)


def _field_path(error: jsonschema.ValidationError, prefix: str = "") -> str:
    parts = [str(p) for p in error.absolute_path]
    # "required" errors point at the parent, name the missing key instead
    if error.validator == "required" and isinstance(error.message, str) and "'" in error.message:
        parts.append(error.message.split("'")[1])
    path = ".".join(parts)
    if prefix:
        return f"{prefix}.{path}" if path else prefix
    return path or "<root>"


def _parse_config_text(text: str, suffix: str) -> Any:
    """YAML for .yaml/.yml, JSON for .json; an empty document is a mapping-less config"""
    if suffix not in YAML_SUFFIXES + JSON_SUFFIXES:
        raise ConfigError(f"Unsupported config format '{suffix or '<none>'}'", {"field": "<file>"})
    try:
        data = yaml.safe_load(text) if suffix in YAML_SUFFIXES else json.loads(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"Config does not parse at line {line}: {getattr(e, 'problem', e)}",
                          {"field": "<file>", "line": line})
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config does not parse at line {e.lineno}: {e.msg}", {"field": "<file>", "line": e.lineno})
    if data is None:
        raise ConfigError("Config file is empty", {"field": "<root>", "line": 1})
    return data


@dataclass
class SolverSettings:
    """Numeric knobs shared by the solvers"""
    condition_ceiling: float = 1e14
    resolvent_cap: float = 1e10
    refine_tolerance: float = 1e-10
    cluster_tolerance: float = 1e-4
    dedupe_tolerance: float = 1e-9
    max_grid_cells: int = 100000
    symbolic_term_cap: int = 200000
    max_parametrix_depth: int = 8
    threads: int = 1
    progress: bool = False

    def __post_init__(self):
        if self.threads is None or self.threads < 1:
            self.threads = 1

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> 'SolverSettings':
        data = dict(data or {})
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown solver setting: {unknown[0]}", {"field": f"solver.{unknown[0]}"})
        return cls(**data)


@dataclass
class RunConfig:
    """Global configuration for one batch run"""
    task: str = "identities-check"
    output_dir: str = "outputs"
    problem: Optional[Dict[str, Any]] = None
    task_params: Dict[str, Any] = None
    seed: int = 0
    solver: SolverSettings = None
    log_level: str = "INFO"
    source_path: Optional[str] = None

    def __post_init__(self):
        if self.task_params is None:
            self.task_params = {}
        if self.solver is None:
            self.solver = SolverSettings()
        elif isinstance(self.solver, dict):
            self.solver = SolverSettings.from_dict(self.solver)

    @staticmethod
    def validate(data: Any) -> None:
        """Check the raw mapping against the base and per-task schemas"""
        if not isinstance(data, dict):
            raise ConfigError("Config root must be a mapping", {"field": "<root>"})
        for error in sorted(jsonschema.Draft7Validator(BASE_SCHEMA).iter_errors(data), key=lambda e: list(e.absolute_path)):
            field_name = _field_path(error)
            raise ConfigError(f"Invalid config field '{field_name}': {error.message}", {"field": field_name})

        task = data["task"]
        if task in PROBLEM_TASKS and "problem" not in data:
            raise ConfigError(f"Task '{task}' needs a problem block", {"field": "problem"})
        params = data.get("task_params", {}) or {}
        schema = TASK_SCHEMAS[task]
        for error in sorted(jsonschema.Draft7Validator(schema).iter_errors(params), key=lambda e: list(e.absolute_path)):
            field_name = _field_path(error, "task_params")
            raise ConfigError(f"Invalid config field '{field_name}': {error.message}", {"field": field_name})

    @classmethod
    def from_dict(cls, data: Dict[str, Any], source_path: Optional[str] = None) -> 'RunConfig':
        cls.validate(data)
        return cls(
            task=data["task"],
            output_dir=data["output_dir"],
            problem=data.get("problem"),
            task_params=dict(data.get("task_params") or {}),
            seed=int(data.get("seed", 0)),
            solver=SolverSettings.from_dict(data.get("solver")),
            log_level=data.get("log_level", "INFO"),
            source_path=source_path,
        )

    @classmethod
    def from_file(cls, config_path: str) -> 'RunConfig':
        """Parse a YAML or JSON run file and validate it; parse errors carry the offending line"""
        path = Path(config_path)
        if not path.is_file():
            raise ConfigError(f"Config file not found: {config_path}", {"field": "<file>", "path": str(path)})
        data = _parse_config_text(path.read_text(encoding='utf-8'), path.suffix.lower())
        logger.debug(f"Loaded config {path} for task {data.get('task') if isinstance(data, dict) else None}")
        return cls.from_dict(data, source_path=str(path))

    def params(self, key: str, default: Any = None) -> Any:
        return self.task_params.get(key, default)

    def ensure_output_dir(self) -> Path:
        out = Path(self.output_dir)
        # relative output dirs resolve against the working directory
        if not out.is_absolute():
            out = Path(os.getcwd()) / out
        out.mkdir(parents=True, exist_ok=True)
        return out
