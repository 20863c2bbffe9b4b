"""Declarative experiment configuration (YAML) with strict key checking."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields

import yaml

from .cases import NoiseSpec, get_case
from .errors import ConfigurationError
from .model import ModelConfig
from .objective import ObjectiveConfig
from .training import TrainConfig


@dataclass
class DataConfig:
    n_records: int = 2048
    n_train: int = 1024
    n_val: int = 512
    n_test: int = 512
    noise: NoiseSpec | None = None  # None: case defaults

    def __post_init__(self):
        if isinstance(self.noise, dict):
            self.noise = _build(NoiseSpec, self.noise, "data.noise")
        if min(self.n_train, self.n_val, self.n_test) < 0 or self.n_train + self.n_val + self.n_test > self.n_records:
            raise ConfigurationError("data split sizes must be non-negative and fit in n_records")
        if self.n_train < 1 or self.n_val < 1:
            raise ConfigurationError("n_train and n_val must be at least 1")


@dataclass
class EvaluationConfig:
    n_score_train: int = 1024
    n_score_test: int = 512
    regressor: str = "linear"
    lambdas: list = field(default_factory=lambda: [-1.0, -0.1, -0.01, -0.001, 0.0, 0.001, 0.01, 0.1, 1.0])
    runs: int = 6
    traverse_factor: str | None = None  # None: first physics factor
    n_grid: int = 5
    n_real: int = 1000
    fixed_values: dict = field(default_factory=dict)
    modes: list = field(default_factory=lambda: ["interpolation", "extrapolation"])
    quadrants: list = field(default_factory=lambda: [0, 1, 2, 3])
    pool_size: int = 8192
    baselines: dict = field(default_factory=dict)  # per-baseline option dicts

    def __post_init__(self):
        if self.runs < 1 or self.n_grid < 1 or self.n_real < 1:
            raise ConfigurationError("runs, n_grid and n_real must be at least 1")
        if self.regressor != "linear":
            raise ConfigurationError(f"unknown regressor {self.regressor!r}")


@dataclass
class ExperimentConfig:
    case_id: str = "beam"
    seed: int = 0
    out_dir: str = "runs"
    grl_lambda: float | None = None  # None: case default
    d_zc: int | None = None
    d_zy: int | None = None
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    objective: ObjectiveConfig = field(default_factory=ObjectiveConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)

    def __post_init__(self):
        case = get_case(self.case_id)  # raises on an unknown case
        for name in ("d_zc", "d_zy"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ConfigurationError(f"{name} must be at least 1")
        # the layout fields live at top level; mirror them into the model config
        self.model = dataclasses.replace(self.model, d_zc=self.d_zc, d_zy=self.d_zy)
        factor = self.evaluation.traverse_factor
        if factor is not None and factor not in [f.name for f in case.factors]:
            raise ConfigurationError(f"case {self.case_id!r} has no generative factor {factor!r}")

    @property
    def case(self):
        return get_case(self.case_id)

    @property
    def noise(self) -> NoiseSpec:
        return self.data.noise or self.case.noise

    @property
    def lam(self) -> float:
        return self.case.grl_lambda if self.grl_lambda is None else float(self.grl_lambda)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["model"].pop("d_zc")
        d["model"].pop("d_zy")
        for k in ("mean_clamp", "logstd_clamp", "cov_clamp", "aux_logstd_clamp"):
            d["model"][k] = list(d["model"][k])
        return d

    def dump(self, path):
        with open(path, "w") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=False)


_SECTIONS = {"data": DataConfig, "model": ModelConfig, "objective": ObjectiveConfig, "train": TrainConfig,
             "evaluation": EvaluationConfig}


def _build(cls, raw, where):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{where}: expected a mapping, got {type(raw).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigurationError(f"{where}: unknown key(s) {', '.join(unknown)}")
    try:
        return cls(**raw)
    except TypeError as exc:
        raise ConfigurationError(f"{where}: {exc}") from exc


def config_from_dict(raw) -> ExperimentConfig:
    raw = dict(raw or {})
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigurationError(f"unknown key(s) {', '.join(unknown)}")
    for key, cls in _SECTIONS.items():
        if key in raw:
            sub = raw[key]
            if key == "model" and isinstance(sub, dict) and ({"d_zc", "d_zy"} & set(sub)):
                raise ConfigurationError("model: set d_zc/d_zy at top level")
            raw[key] = _build(cls, sub, key)
    return ExperimentConfig(**raw)


def load_config(path=None, **overrides) -> ExperimentConfig:
    """Read a YAML config (None gives all defaults); ``overrides`` replace top-level keys."""
    raw = {}
    if path is not None:
        try:
            with open(path) as fh:
                raw = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"invalid YAML in {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError("config root must be a mapping")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_dict(raw)
