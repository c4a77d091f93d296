"""Experiment configuration: strict TOML schema, canonical text, hashing.

A config file has a ``[model]`` section (preset plus parameters), a
top-level ``schemes`` list, an ``[experiment]`` section (mode, ladder,
paths, seed, ...), and an ``[output]`` section.  Unknown keys anywhere are
rejected.  The *effective* configuration (after command-line overrides) is
re-serialized into a canonical text whose SHA-256 hex digest is the config
hash; every run echoes that text into its output directory, so a run is
reproducible from the artifacts alone.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .model import (
    NonlinearitySpec,
    SpectralModel,
    heat_1d_model,
    sode_model,
    trace_class_3d_model,
)
from .schemes import SchemeId

__all__ = [
    "ConfigError",
    "U0Config",
    "ModelConfig",
    "ExperimentConfig",
    "OutputConfig",
    "Config",
    "load_config",
    "parse_config",
    "canonical_text",
    "config_hash",
    "build_model",
    "build_u0",
]


class ConfigError(ValueError):
    """Malformed, incomplete, or unknown configuration content."""


_PRESETS = ("heat1d", "trace3d", "sode")
_NONLINEARITIES = ("zero", "linear", "tanh", "cubic")
_MODES = ("local", "global")
_REFERENCES = ("auto", "exact", "record")
_FORMATS = ("csv", "txt", "svg")
_SCHEME_NAMES = tuple(s.value for s in SchemeId)


@dataclass(frozen=True)
class U0Config:
    kind: str = "power"  # "power": amp / n^exponent; "single_mode": amp e_i
    amplitude: float = 0.1
    exponent: float = 2.0
    index: int = 1


@dataclass(frozen=True)
class ModelConfig:
    preset: str
    size: int
    nonlinearity: str = "zero"
    alpha: float | None = None
    bs: tuple[float, ...] | None = None
    noise: bool = True
    u0: U0Config = field(default_factory=U0Config)


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "local"
    ladder: tuple[int, ...] = ()
    paths: int = 200
    seed: int = 0
    t_final: float = 1.0
    reference: str = "auto"
    threads: int = 1
    p: float = 2.0
    time_integrals: bool = True
    steps: int = 200  # trajectory steps for single simulations


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "out"
    formats: tuple[str, ...] = ("csv", "txt", "svg")


@dataclass(frozen=True)
class Config:
    model: ModelConfig
    schemes: tuple[SchemeId, ...]
    experiment: ExperimentConfig
    output: OutputConfig

    def with_overrides(
        self,
        seed: int | None = None,
        threads: int | None = None,
        out: str | None = None,
    ) -> "Config":
        exp = self.experiment
        if seed is not None:
            exp = replace(exp, seed=seed)
        if threads is not None:
            exp = replace(exp, threads=threads)
        output = self.output if out is None else replace(self.output, dir=out)
        return replace(self, experiment=exp, output=output)


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"missing required key '{key}' in [{where}]")
    return table[key]


def _reject_unknown(table: dict, allowed: tuple[str, ...], where: str):
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        raise ConfigError(
            f"unknown key(s) in [{where}]: {', '.join(unknown)}"
        )


def _as_int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where} must be an integer, got {value!r}")
    return value


def _as_float(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    return float(value)


def _as_bool(value, where: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"{where} must be a boolean, got {value!r}")
    return value


def _as_str(value, where: str, choices: tuple[str, ...] | None = None) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"{where} must be a string, got {value!r}")
    if choices is not None and value not in choices:
        raise ConfigError(
            f"{where} must be one of {', '.join(choices)}; got {value!r}"
        )
    return value


def _parse_u0(table, where="model.u0") -> U0Config:
    if not isinstance(table, dict):
        raise ConfigError(f"{where} must be a table")
    _reject_unknown(
        table, ("kind", "amplitude", "exponent", "index"), where
    )
    kind = _as_str(
        table.get("kind", "power"),
        f"{where}.kind",
        ("power", "single_mode"),
    )
    return U0Config(
        kind=kind,
        amplitude=_as_float(
            table.get("amplitude", 0.1), f"{where}.amplitude"
        ),
        exponent=_as_float(table.get("exponent", 2.0), f"{where}.exponent"),
        index=_as_int(table.get("index", 1), f"{where}.index"),
    )


def _parse_model(table) -> ModelConfig:
    _reject_unknown(
        table,
        ("preset", "size", "nonlinearity", "alpha", "bs", "noise", "u0"),
        "model",
    )
    preset = _as_str(_require(table, "preset", "model"), "model.preset",
                     _PRESETS)
    size = _as_int(_require(table, "size", "model"), "model.size")
    if size < 1:
        raise ConfigError("model.size must be >= 1")
    nonlinearity = _as_str(
        table.get("nonlinearity", "zero"),
        "model.nonlinearity",
        _NONLINEARITIES,
    )
    alpha = table.get("alpha")
    if alpha is not None:
        alpha = _as_float(alpha, "model.alpha")
    if nonlinearity == "linear" and alpha is None:
        raise ConfigError("model.alpha is required for the linear drift")
    if nonlinearity != "linear" and alpha is not None:
        raise ConfigError(
            "model.alpha only applies to the linear drift"
        )
    bs = table.get("bs")
    if bs is not None:
        if preset != "sode":
            raise ConfigError("model.bs only applies to the sode preset")
        if not isinstance(bs, list) or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool)
            for x in bs
        ):
            raise ConfigError("model.bs must be a list of numbers")
        if len(bs) != size:
            raise ConfigError(
                f"model.bs must have model.size = {size} entries"
            )
        bs = tuple(float(x) for x in bs)
    return ModelConfig(
        preset=preset,
        size=size,
        nonlinearity=nonlinearity,
        alpha=alpha,
        bs=bs,
        noise=_as_bool(table.get("noise", True), "model.noise"),
        u0=_parse_u0(table.get("u0", {})),
    )


def _parse_experiment(table) -> ExperimentConfig:
    _reject_unknown(
        table,
        (
            "mode",
            "ladder",
            "paths",
            "seed",
            "t_final",
            "reference",
            "threads",
            "p",
            "time_integrals",
            "steps",
        ),
        "experiment",
    )
    ladder = table.get("ladder", [])
    if not isinstance(ladder, list):
        raise ConfigError("experiment.ladder must be a list of integers")
    ladder = tuple(
        _as_int(x, "experiment.ladder entry") for x in ladder
    )
    seed = _as_int(table.get("seed", 0), "experiment.seed")
    if not 0 <= seed < 2**64:
        raise ConfigError("experiment.seed must fit in 64 bits")
    return ExperimentConfig(
        mode=_as_str(table.get("mode", "local"), "experiment.mode", _MODES),
        ladder=ladder,
        paths=_as_int(table.get("paths", 200), "experiment.paths"),
        seed=seed,
        t_final=_as_float(table.get("t_final", 1.0), "experiment.t_final"),
        reference=_as_str(
            table.get("reference", "auto"),
            "experiment.reference",
            _REFERENCES,
        ),
        threads=_as_int(table.get("threads", 1), "experiment.threads"),
        p=_as_float(table.get("p", 2.0), "experiment.p"),
        time_integrals=_as_bool(
            table.get("time_integrals", True), "experiment.time_integrals"
        ),
        steps=_as_int(table.get("steps", 200), "experiment.steps"),
    )


def _parse_output(table) -> OutputConfig:
    _reject_unknown(table, ("dir", "formats"), "output")
    formats = table.get("formats", list(_FORMATS))
    if not isinstance(formats, list) or not formats:
        raise ConfigError("output.formats must be a nonempty list")
    for f in formats:
        _as_str(f, "output.formats entry", _FORMATS)
    return OutputConfig(
        dir=_as_str(table.get("dir", "out"), "output.dir"),
        formats=tuple(formats),
    )


def parse_config(text: str) -> Config:
    """Parse and validate configuration text (strict: unknown keys fail)."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from exc
    _reject_unknown(
        raw, ("model", "schemes", "experiment", "output"), "top level"
    )
    if "model" not in raw:
        raise ConfigError("missing [model] section")
    schemes_raw = raw.get("schemes", [])
    if not isinstance(schemes_raw, list) or not schemes_raw:
        raise ConfigError("schemes must be a nonempty list of scheme names")
    schemes = []
    for name in schemes_raw:
        _as_str(name, "schemes entry", _SCHEME_NAMES)
        schemes.append(SchemeId(name))
    return Config(
        model=_parse_model(raw["model"]),
        schemes=tuple(schemes),
        experiment=_parse_experiment(raw.get("experiment", {})),
        output=_parse_output(raw.get("output", {})),
    )


def load_config(path: str | Path) -> Config:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config(p.read_text())


# ---------------------------------------------------------------------------
# canonical serialization and hashing


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {v!r}")


def canonical_text(cfg: Config) -> str:
    """Deterministic TOML serialization of the effective configuration."""
    lines = [
        "schemes = " + _toml_value([s.value for s in cfg.schemes]),
        "",
        "[model]",
        f"preset = {_toml_value(cfg.model.preset)}",
        f"size = {cfg.model.size}",
        f"nonlinearity = {_toml_value(cfg.model.nonlinearity)}",
    ]
    if cfg.model.alpha is not None:
        lines.append(f"alpha = {_toml_value(cfg.model.alpha)}")
    if cfg.model.bs is not None:
        lines.append(f"bs = {_toml_value(cfg.model.bs)}")
    lines.append(f"noise = {_toml_value(cfg.model.noise)}")
    u0 = cfg.model.u0
    lines.append(
        "u0 = { kind = %s, amplitude = %s, exponent = %s, index = %s }"
        % (
            _toml_value(u0.kind),
            _toml_value(u0.amplitude),
            _toml_value(u0.exponent),
            _toml_value(u0.index),
        )
    )
    e = cfg.experiment
    lines += [
        "",
        "[experiment]",
        f"mode = {_toml_value(e.mode)}",
        f"ladder = {_toml_value(list(e.ladder))}",
        f"paths = {e.paths}",
        f"seed = {e.seed}",
        f"t_final = {_toml_value(e.t_final)}",
        f"reference = {_toml_value(e.reference)}",
        f"threads = {e.threads}",
        f"p = {_toml_value(e.p)}",
        f"time_integrals = {_toml_value(e.time_integrals)}",
        f"steps = {e.steps}",
        "",
        "[output]",
        f"dir = {_toml_value(cfg.output.dir)}",
        f"formats = {_toml_value(list(cfg.output.formats))}",
    ]
    return "\n".join(lines) + "\n"


def config_hash(cfg: Config) -> str:
    """SHA-256 hex digest of the canonical configuration text."""
    return hashlib.sha256(canonical_text(cfg).encode()).hexdigest()


# ---------------------------------------------------------------------------
# realizing the configured model


def _nonlinearity(mc: ModelConfig) -> NonlinearitySpec:
    if mc.nonlinearity == "zero":
        return NonlinearitySpec.zero()
    if mc.nonlinearity == "linear":
        return NonlinearitySpec.linear_mult(mc.alpha)
    return NonlinearitySpec.pointwise(mc.nonlinearity)


def build_model(mc: ModelConfig) -> SpectralModel:
    """Instantiate the configured preset (optionally with noise removed)."""
    nl = _nonlinearity(mc)
    if mc.preset == "heat1d":
        m = heat_1d_model(mc.size, nl)
    elif mc.preset == "trace3d":
        m = trace_class_3d_model(mc.size, nl)
    else:
        m = sode_model(mc.size, bs=mc.bs, nonlinearity=nl)
    if not mc.noise:
        m = type(m)(
            name=m.name,
            lambdas=m.lambdas,
            bs=np.zeros(m.dim),
            kappa=m.kappa,
            nonlinearity=m.nonlinearity,
            smoothness=m.smoothness,
            collocation=m.collocation,
            modes_per_axis=m.modes_per_axis,
            index_set=m.index_set,
        )
    return m


def build_u0(mc: ModelConfig, model: SpectralModel) -> np.ndarray:
    u0c = mc.u0
    if u0c.kind == "power":
        n = np.arange(1, model.dim + 1, dtype=float)
        return u0c.amplitude / n**u0c.exponent
    if not 1 <= u0c.index <= model.dim:
        raise ConfigError(
            f"u0.index must lie in [1, {model.dim}]; got {u0c.index}"
        )
    u0 = np.zeros(model.dim)
    u0[u0c.index - 1] = u0c.amplitude
    return u0
