"""Experiment configuration: schema, validation, presets.

A config is a plain JSON document with one section per pipeline stage.  Every
field has a default, unknown keys are rejected with their dotted path, and
range checks reuse the validation already built into the runtime dataclasses
(TrainConfig, NoiseProfile) where one exists.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

from .noise import NoiseProfile
from .operator_net import TrainConfig

# Exit-code categories for the command-line harness.
EXIT_OK = 0
EXIT_CONFIG = 2  # config file invalid or inconsistent
EXIT_MISSING = 3  # required input artifact not found
EXIT_RUNTIME = 4  # execution failed (divergence, empty estimation, ...)


class ConfigError(ValueError):
    """Invalid configuration; message names the offending dotted key."""


class MissingInputError(FileNotFoundError):
    """A required upstream artifact does not exist."""


# ------------------------------------------------------------------ sections


TASKS = ("antiderivative", "advection", "window")

# Task-specific dataset knobs and their types; everything else is rejected.
_TASK_PARAMS = {
    "antiderivative": {"n_sensors": int, "n_queries": int, "length": float},
    "advection": {
        "resolution": int,
        "sensor_stride": int,
        "n_query_x": int,
        "n_query_t": int,
        "speed": float,
        "length": float,
    },
    "window": {
        "n_steps": int,
        "window": int,
        "horizon": int,
        "damp": float,
        "noise": float,
    },
}

_TASK_PARAM_DEFAULTS = {
    "antiderivative": {"n_sensors": 10, "n_queries": 100, "length": 0.4},
    "advection": {
        "resolution": 100,
        "sensor_stride": 5,
        "n_query_x": 50,
        "n_query_t": 50,
        "speed": 1.0,
        "length": 1.0,
    },
    "window": {"n_steps": 512, "window": 16, "horizon": 8, "damp": 2e-3, "noise": 0.0},
}


@dataclass(frozen=True)
class DataConfig:
    n_train: int = 200
    n_cal: int = 50
    n_test: int = 50
    seed: int = 0
    params: dict = field(default_factory=dict)

    def validate(self, task: str) -> None:
        for name in ("n_train", "n_cal", "n_test"):
            if getattr(self, name) < 1:
                raise ConfigError(f"data.{name} must be >= 1")
        allowed = _TASK_PARAMS[task]
        for key, val in self.params.items():
            if key not in allowed:
                raise ConfigError(
                    f"data.{key} is not a parameter of task {task!r} "
                    f"(expected one of {sorted(allowed)})"
                )
            if not isinstance(val, (int, float)) or isinstance(val, bool):
                raise ConfigError(f"data.{key} must be a number, got {val!r}")


@dataclass(frozen=True)
class ArchitectureConfig:
    width: int = 10
    layers: int = 2
    latent: int | None = None
    residual: bool = False
    trunk_width: int | None = None
    trunk_depth: int | None = None
    fourier_k: int = 0  # extract this many dominant frequencies from the data
    fourier_freqs: tuple[float, ...] | None = None  # or give them explicitly

    def validate(self) -> None:
        if self.width < 2:
            raise ConfigError("architecture.width must be >= 2")
        if self.layers < 1:
            raise ConfigError("architecture.layers must be >= 1")
        for name in ("latent", "trunk_width", "trunk_depth"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ConfigError(f"architecture.{name} must be >= 1 when given")
        if self.fourier_k < 0:
            raise ConfigError("architecture.fourier_k must be >= 0")
        if self.fourier_k and self.fourier_freqs is not None:
            raise ConfigError(
                "architecture.fourier_k and architecture.fourier_freqs are exclusive"
            )


@dataclass(frozen=True)
class EnsembleConfig:
    size: int = 8
    mode: str = "independent"  # or "spqc"

    def validate(self) -> None:
        if self.size < 1:
            raise ConfigError("ensemble.size must be >= 1")
        if self.mode not in ("independent", "spqc"):
            raise ConfigError(f"ensemble.mode must be independent or spqc, got {self.mode!r}")


@dataclass(frozen=True)
class TrainingSection:
    iters: int = 30_000
    lr: float = 1e-3
    gamma: float = 1.0
    min_lr: float = 0.0
    batch: int | str = "Full"
    log_every: int = 200
    seed: int = 0
    contraction_dtype: str = "float64"

    def validate(self) -> None:
        if isinstance(self.batch, str):
            if self.batch.lower() != "full":
                raise ConfigError(f'training.batch must be "Full" or an int, got {self.batch!r}')
        elif self.batch < 1:
            raise ConfigError("training.batch must be >= 1")
        try:
            self.to_train_config()
        except ValueError as exc:
            raise ConfigError(f"training: {exc}") from exc

    def to_train_config(self) -> TrainConfig:
        batch = None if isinstance(self.batch, str) else int(self.batch)
        return TrainConfig(
            iters=self.iters,
            lr=self.lr,
            gamma=self.gamma,
            min_lr=self.min_lr,
            batch_functions=batch,
            log_every=self.log_every,
            seed=self.seed,
            contraction_dtype=self.contraction_dtype,
        )


@dataclass(frozen=True)
class NoiseSection:
    lambdas: tuple[float, ...] = (2e-4, 4e-4, 6e-4, 8e-4)
    shots: tuple[int, ...] = (1_000, 10_000, 100_000)
    readout: float = 0.0
    two_qubit_scale: float = 0.8
    method: str = "multinomial"
    seed: int = 0

    def validate(self) -> None:
        if not self.lambdas:
            raise ConfigError("noise.lambdas must not be empty")
        if not self.shots:
            raise ConfigError("noise.shots must not be empty")
        if any(s is not None and s < 1 for s in self.shots):
            raise ConfigError("noise.shots entries must be >= 1 (or null for exact)")
        try:
            self.profile(self.lambdas[0], self.shots[0])
        except ValueError as exc:
            raise ConfigError(f"noise: {exc}") from exc

    def profile(self, lam: float, shots: int | None) -> NoiseProfile:
        return NoiseProfile(
            lam=lam,
            two_qubit_scale=self.two_qubit_scale,
            readout_flip=self.readout,
            shots=None if shots is None else int(shots),
            method=self.method,
        )


@dataclass(frozen=True)
class ConformalSection:
    alpha: float = 0.1
    eps: float = 1e-8

    def validate(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("conformal.alpha must lie in (0, 1)")
        if self.eps < 0.0:
            raise ConfigError("conformal.eps must be >= 0")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    task: str = "antiderivative"
    out_dir: str | None = None
    data: DataConfig = field(default_factory=DataConfig)
    architecture: ArchitectureConfig = field(default_factory=ArchitectureConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    training: TrainingSection = field(default_factory=TrainingSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    conformal: ConformalSection = field(default_factory=ConformalSection)

    def validate(self) -> None:
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        self.data.validate(self.task)
        self.architecture.validate()
        self.ensemble.validate()
        self.training.validate()
        self.noise.validate()
        self.conformal.validate()

    def data_params(self) -> dict:
        merged = dict(_TASK_PARAM_DEFAULTS[self.task])
        merged.update(self.data.params)
        return merged


# ----------------------------------------------------------------- dict i/o


_SECTION_FIELDS = {
    "data": ("n_train", "n_cal", "n_test", "seed"),
    "architecture": (
        "width",
        "layers",
        "latent",
        "residual",
        "trunk_width",
        "trunk_depth",
        "fourier_k",
        "fourier_freqs",
    ),
    "ensemble": ("size", "mode"),
    "training": (
        "iters",
        "lr",
        "gamma",
        "min_lr",
        "batch",
        "log_every",
        "seed",
        "contraction_dtype",
    ),
    "noise": ("lambdas", "shots", "readout", "two_qubit_scale", "method", "seed"),
    "conformal": ("alpha", "eps"),
}


def _check_section(name: str, given: dict) -> dict:
    if not isinstance(given, dict):
        raise ConfigError(f"{name} must be an object")
    allowed = _SECTION_FIELDS[name]
    out = {}
    for key, val in given.items():
        if name == "data" and key not in allowed:
            continue  # task parameters, validated against the task later
        if key not in allowed:
            raise ConfigError(f"unknown key {name}.{key} (expected one of {sorted(allowed)})")
        out[key] = val
    return out


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build and validate an ExperimentConfig from plain JSON data."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    raw = copy.deepcopy(raw)
    top_allowed = ("name", "task", "out_dir") + tuple(_SECTION_FIELDS)
    for key in raw:
        if key not in top_allowed:
            raise ConfigError(f"unknown key {key} (expected one of {sorted(top_allowed)})")

    def section(name, cls, **extra):
        given = raw.get(name, {})
        fields = _check_section(name, given)
        fields.update(extra)
        try:
            return cls(**fields)
        except TypeError as exc:
            raise ConfigError(f"{name}: {exc}") from exc

    data_raw = raw.get("data", {})
    if not isinstance(data_raw, dict):
        raise ConfigError("data must be an object")
    params = {k: v for k, v in data_raw.items() if k not in _SECTION_FIELDS["data"]}

    arch = section("architecture", ArchitectureConfig)
    if arch.fourier_freqs is not None:
        arch = ArchitectureConfig(
            **{**arch.__dict__, "fourier_freqs": tuple(float(f) for f in arch.fourier_freqs)}
        )
    noise = section("noise", NoiseSection)
    noise = NoiseSection(
        **{
            **noise.__dict__,
            "lambdas": tuple(float(v) for v in noise.lambdas),
            "shots": tuple(None if s is None else int(s) for s in noise.shots),
        }
    )
    cfg = ExperimentConfig(
        name=str(raw.get("name", "experiment")),
        task=str(raw.get("task", "antiderivative")),
        out_dir=raw.get("out_dir"),
        data=section("data", DataConfig, params=params),
        architecture=arch,
        ensemble=section("ensemble", EnsembleConfig),
        training=section("training", TrainingSection),
        noise=noise,
        conformal=section("conformal", ConformalSection),
    )
    cfg.validate()
    return cfg


def config_to_dict(cfg: ExperimentConfig) -> dict:
    out = {
        "name": cfg.name,
        "task": cfg.task,
        "out_dir": cfg.out_dir,
        "data": {
            "n_train": cfg.data.n_train,
            "n_cal": cfg.data.n_cal,
            "n_test": cfg.data.n_test,
            "seed": cfg.data.seed,
            **cfg.data.params,
        },
        "architecture": dict(cfg.architecture.__dict__),
        "ensemble": dict(cfg.ensemble.__dict__),
        "training": dict(cfg.training.__dict__),
        "noise": dict(cfg.noise.__dict__),
        "conformal": dict(cfg.conformal.__dict__),
    }
    arch = out["architecture"]
    if arch["fourier_freqs"] is not None:
        arch["fourier_freqs"] = list(arch["fourier_freqs"])
    out["noise"]["lambdas"] = list(out["noise"]["lambdas"])
    out["noise"]["shots"] = list(out["noise"]["shots"])
    return out


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return config_from_dict(raw)


def save_config(cfg: ExperimentConfig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n")
    return path


def apply_overrides(raw: dict, overrides: list[str]) -> dict:
    """Apply ``section.key=value`` strings; values parse as JSON when possible."""
    raw = copy.deepcopy(raw)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        dotted, text = item.split("=", 1)
        keys = dotted.strip().split(".")
        if not all(keys):
            raise ConfigError(f"override {item!r} has an empty key component")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = raw
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {dotted}: {k} is not an object")
        node[keys[-1]] = value
    return raw


# ------------------------------------------------------------------- presets

# Reference experiment rows: the two synthetic benchmarks at ensemble size 8,
# plus a fast smoke-scale variant of each for pipeline tests.
_PRESETS: dict[str, dict] = {
    "antiderivative-l8": {
        "name": "antiderivative-l8",
        "task": "antiderivative",
        "data": {"n_train": 200, "n_cal": 50, "n_test": 50, "seed": 0},
        "architecture": {"width": 10, "layers": 2},
        "ensemble": {"size": 8},
        "training": {"iters": 30_000, "lr": 1e-3, "batch": "Full"},
        "noise": {
            "lambdas": [2e-4, 4e-4, 6e-4, 8e-4],
            "shots": [1_000, 10_000, 100_000],
        },
        "conformal": {"alpha": 0.1},
    },
    "advection-l8": {
        "name": "advection-l8",
        "task": "advection",
        "data": {"n_train": 1_000, "n_cal": 200, "n_test": 200, "seed": 0},
        "architecture": {"width": 20, "layers": 7, "residual": True},
        "ensemble": {"size": 8},
        "training": {
            "iters": 40_000,
            "lr": 1e-3,
            "gamma": 0.99,
            "min_lr": 5e-4,
            "batch": "Full",
            "contraction_dtype": "float32",
        },
        "noise": {
            "lambdas": [2e-4, 4e-4, 6e-4, 8e-4],
            "shots": [1_000, 10_000, 100_000],
        },
        "conformal": {"alpha": 0.1},
    },
    "antiderivative-smoke": {
        "name": "antiderivative-smoke",
        "task": "antiderivative",
        "data": {
            "n_train": 24,
            "n_cal": 12,
            "n_test": 12,
            "seed": 0,
            "n_queries": 40,
            "n_sensors": 6,
        },
        "architecture": {"width": 5, "layers": 2},
        "ensemble": {"size": 3},
        "training": {"iters": 400, "lr": 3e-3, "batch": "Full", "log_every": 100},
        "noise": {"lambdas": [4e-4], "shots": [20_000]},
        "conformal": {"alpha": 0.1},
    },
    "window-smoke": {
        "name": "window-smoke",
        "task": "window",
        "data": {
            "n_train": 60,
            "n_cal": 20,
            "n_test": 20,
            "seed": 0,
            "n_steps": 160,
            "window": 8,
            "horizon": 4,
        },
        "architecture": {"width": 5, "layers": 2, "fourier_k": 2},
        "ensemble": {"size": 3},
        "training": {"iters": 400, "lr": 3e-3, "batch": "Full", "log_every": 100},
        "noise": {"lambdas": [4e-4], "shots": [20_000]},
        "conformal": {"alpha": 0.1},
    },
}


def preset_names() -> tuple[str, ...]:
    return tuple(sorted(_PRESETS))


def builtin_preset(name: str) -> dict:
    """Return a copy of the named preset as plain config data."""
    if name not in _PRESETS:
        raise ConfigError(f"unknown preset {name!r} (available: {', '.join(preset_names())})")
    return copy.deepcopy(_PRESETS[name])
