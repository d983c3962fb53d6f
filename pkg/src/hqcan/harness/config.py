"""Experiment configuration: JSON with data, schedule, models, seeds, output."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..can_data import N_FEATURES

MODELS = ("hybrid", "quantum_only", "lstm")


class ConfigError(ValueError):
    pass


@dataclass
class DataConfig:
    source: str = "synthetic"   # "synthetic" or "csv"
    csv_path: str | None = None
    T: int = 9520


@dataclass
class ScheduleConfig:
    train_len: int = 6000
    attack_len_train: int = 200
    attack_len_test: int = 100
    shift_fraction: tuple[float, float] = (0.2, 0.5)


@dataclass
class NetConfig:
    epochs: int
    batch_size: int
    learning_rate: float


@dataclass
class QnnSettings(NetConfig):
    layers: int = 6


@dataclass
class LstmSettings(NetConfig):
    hidden: int = 64


@dataclass
class ModelsConfig:
    selected: tuple[str, ...] = MODELS
    augment_mirror: bool = True
    cnn: NetConfig = field(default_factory=lambda: NetConfig(150, 32, 3e-3))
    hybrid: QnnSettings = field(default_factory=lambda: QnnSettings(20, 1, 0.002, layers=6))
    quantum_only: QnnSettings = field(default_factory=lambda: QnnSettings(50, 8, 0.002, layers=8))
    lstm: LstmSettings = field(default_factory=lambda: LstmSettings(100, 32, 1e-3, hidden=64))


@dataclass
class SeedsConfig:
    data: int = 0
    schedule: int = 0
    shift: int = 0
    model: int = 0


@dataclass
class OutputConfig:
    dir: str = "out"
    figures: bool = True


@dataclass
class ExperimentConfig:
    data: DataConfig = field(default_factory=DataConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    models: ModelsConfig = field(default_factory=ModelsConfig)
    seeds: SeedsConfig = field(default_factory=SeedsConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def validate(self) -> "ExperimentConfig":
        d, s, m = self.data, self.schedule, self.models
        if d.source not in ("synthetic", "csv"):
            raise ConfigError(f"data.source must be 'synthetic' or 'csv', got {d.source!r}")
        if d.source == "csv":
            if not d.csv_path or not Path(d.csv_path).is_file():
                raise ConfigError(f"data.csv_path {d.csv_path!r} does not exist")
        elif d.T < 13:
            raise ConfigError(f"data.T must be >= 13, got {d.T}")
        if s.attack_len_train <= 0 or s.attack_len_test <= 0:
            raise ConfigError("attack lengths must be positive")
        lo, hi = s.shift_fraction
        if not 0 < lo <= hi:
            raise ConfigError(f"schedule.shift_fraction needs 0 < lo <= hi, got {s.shift_fraction}")
        unknown = set(m.selected) - set(MODELS)
        if unknown or not m.selected:
            raise ConfigError(f"models.selected must be a nonempty subset of {MODELS}, got {m.selected}")
        for name in ("cnn", "hybrid", "quantum_only", "lstm"):
            net = getattr(m, name)
            if net.epochs <= 0 or net.batch_size < 1 or net.learning_rate < 0:
                raise ConfigError(f"models.{name}: epochs > 0, batch_size >= 1, learning_rate >= 0 required")
        if m.hybrid.layers < 1 or m.quantum_only.layers < 1 or m.lstm.hidden < 1:
            raise ConfigError("layer counts and hidden size must be positive")
        # schedule capacity depends on the loaded data length; the attack stage checks it
        return self

    def with_seed(self, seed: int) -> "ExperimentConfig":
        cfg = from_dict(to_dict(self))
        cfg.seeds = SeedsConfig(seed, seed, seed, seed)
        return cfg

    def with_output(self, out: str) -> "ExperimentConfig":
        cfg = from_dict(to_dict(self))
        cfg.output.dir = str(out)
        return cfg


def check_capacity(T: int, s: ScheduleConfig) -> None:
    """Raises ConfigError when the attack intervals cannot fit."""
    if not 0 < s.train_len < T:
        raise ConfigError(f"schedule.train_len must be in (0, {T}), got {s.train_len}")
    if N_FEATURES * s.attack_len_train > s.train_len:
        raise ConfigError(f"{N_FEATURES} x {s.attack_len_train} attack steps exceed train_len {s.train_len}")
    if N_FEATURES * s.attack_len_test > T - s.train_len:
        raise ConfigError(f"{N_FEATURES} x {s.attack_len_test} attack steps exceed test length {T - s.train_len}")


def to_dict(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d["schedule"]["shift_fraction"] = list(cfg.schedule.shift_fraction)
    d["models"]["selected"] = list(cfg.models.selected)
    return d


def _build(cls, raw, where: str):
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected an object")
    known = {f.name: f for f in fields(cls)}
    extra = set(raw) - set(known)
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
    try:
        return cls(**raw)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    extra = set(raw) - {"data", "schedule", "models", "seeds", "output"}
    if extra:
        raise ConfigError(f"unknown config sections {sorted(extra)}")
    sched = dict(raw.get("schedule", {}))
    if "shift_fraction" in sched:
        sched["shift_fraction"] = tuple(sched["shift_fraction"])
    models_raw = dict(raw.get("models", {}))
    defaults = ModelsConfig()
    nets = {
        "cnn": NetConfig, "hybrid": QnnSettings, "quantum_only": QnnSettings, "lstm": LstmSettings,
    }
    for name, cls in nets.items():
        if name in models_raw:
            merged = {**asdict(getattr(defaults, name)), **models_raw[name]}
            models_raw[name] = _build(cls, merged, f"models.{name}")
    if "selected" in models_raw:
        models_raw["selected"] = tuple(models_raw["selected"])
    return ExperimentConfig(
        data=_build(DataConfig, raw.get("data", {}), "data"),
        schedule=_build(ScheduleConfig, sched, "schedule"),
        models=_build(ModelsConfig, models_raw, "models"),
        seeds=_build(SeedsConfig, raw.get("seeds", {}), "seeds"),
        output=_build(OutputConfig, raw.get("output", {}), "output"),
    )


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {path} not found")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return from_dict(raw).validate()


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(to_dict(cfg), indent=2, sort_keys=True) + "\n")


def desk_config() -> ExperimentConfig:
    """Ten-times reduced schedule used for the default runs."""
    return ExperimentConfig().validate()


def paper_config() -> ExperimentConfig:
    """Full-length schedule: 95,200 steps, 60,000 train, 2000/1000-step attacks."""
    cfg = ExperimentConfig()
    cfg.data.T = 95_200
    cfg.schedule = ScheduleConfig(60_000, 2000, 1000)
    return cfg.validate()
