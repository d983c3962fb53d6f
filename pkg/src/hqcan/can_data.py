"""CAN log ingestion, DBC-lite signal decoding and a synthetic drive-cycle source.

Log rows are ``timestamp,can_id,dlc,b0,...`` with exactly ``dlc`` hex bytes.
Signal spec rows are ``name,start_bit,bit_length,byte_order,scale,offset,min,max``
with an optional trailing ``can_id`` column naming the carrying frame.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

TIMESTEP = 0.1

# Feature names and physical value ranges of the 13 decoded signals.
FEATURES: tuple[tuple[str, float, float], ...] = (
    ("TQI_COR_STAT", 0.0, 3.0),
    ("TQI_ACOR", 0.0, 99.61),
    ("N", 0.0, 16383.75),
    ("TQI-EMS11", 0.0, 99.61),
    ("TQFR", 0.0, 99.61),
    ("VS", 0.0, 254.0),
    ("BRAKE_ACT", 0.0, 3.0),
    ("TPS", 0.0, 104.69),
    ("PV_AV_CAN", 0.0, 99.61),
    ("TQI_MIN", 0.0, 99.61),
    ("TQI-EMS16", 0.0, 99.61),
    ("TQI_TARGET", 0.0, 99.61),
    ("TQI_MAX", 0.0, 99.61),
)
FEATURE_NAMES = tuple(f[0] for f in FEATURES)
FEATURE_RANGES = {name: (lo, hi) for name, lo, hi in FEATURES}
N_FEATURES = len(FEATURES)


class CanLogError(ValueError):
    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


class SignalSpecError(ValueError):
    pass


@dataclass(frozen=True)
class RawFrame:
    timestamp: float
    can_id: int
    dlc: int
    data: bytes = bytes(8)

    def __post_init__(self):
        if not 0 <= self.dlc <= 8:
            raise ValueError(f"dlc must be 0..8, got {self.dlc}")
        if len(self.data) != 8:
            raise ValueError("data must hold exactly 8 bytes")
        if any(self.data[self.dlc:]):
            raise ValueError("bytes beyond dlc must be zero")
        if not 0 <= self.can_id < (1 << 29):
            raise ValueError(f"can id {self.can_id:#x} exceeds 29 bits")


def parse_can_log(log_text: str) -> list[RawFrame]:
    frames = []
    for lineno, row in enumerate(csv.reader(io.StringIO(log_text)), start=1):
        row = [c.strip() for c in row]
        if not row or not any(row):
            continue
        if lineno == 1 and row[0].lower() == "timestamp":
            continue
        if len(row) < 3:
            raise CanLogError(lineno, f"expected timestamp,can_id,dlc,bytes..., got {len(row)} fields")
        try:
            ts = float(row[0])
        except ValueError:
            raise CanLogError(lineno, f"bad timestamp {row[0]!r}") from None
        try:
            can_id = int(row[1], 16)
        except ValueError:
            raise CanLogError(lineno, f"invalid hex can id {row[1]!r}") from None
        try:
            dlc = int(row[2])
        except ValueError:
            raise CanLogError(lineno, f"bad dlc {row[2]!r}") from None
        payload = row[3:]
        if not 0 <= dlc <= 8 or len(payload) != dlc:
            raise CanLogError(lineno, f"dlc {dlc} does not match {len(payload)} data bytes")
        try:
            data = bytes(int(b, 16) for b in payload)
        except ValueError:
            raise CanLogError(lineno, f"invalid hex byte in {payload}") from None
        if frames and ts < frames[-1].timestamp:
            raise CanLogError(lineno, "timestamps must be nondecreasing")
        try:
            frames.append(RawFrame(ts, can_id, dlc, data + bytes(8 - dlc)))
        except ValueError as exc:
            raise CanLogError(lineno, str(exc)) from None
    return frames


def format_can_log(frames: Iterable[RawFrame]) -> str:
    lines = []
    for f in frames:
        fields = [repr(float(f.timestamp)), f"0x{f.can_id:03X}", str(f.dlc)]
        fields += [f"{b:02X}" for b in f.data[:f.dlc]]
        lines.append(",".join(fields))
    return "\n".join(lines) + ("\n" if lines else "")


@dataclass(frozen=True)
class SignalSpec:
    name: str
    start_bit: int
    bit_length: int
    byte_order: str = "little"
    scale: float = 1.0
    offset: float = 0.0
    min: float = 0.0
    max: float = 0.0
    can_id: int | None = None

    def __post_init__(self):
        if self.byte_order not in ("little", "big"):
            raise SignalSpecError(f"{self.name}: byte_order must be 'little' or 'big'")
        if not 0 <= self.start_bit <= 63 or not 1 <= self.bit_length <= 64:
            raise SignalSpecError(f"{self.name}: start_bit/bit_length out of range")
        if self.scale == 0:
            raise SignalSpecError(f"{self.name}: scale must be nonzero")
        if self.min > self.max:
            raise SignalSpecError(f"{self.name}: min > max")
        if self.shift() < 0 or self.shift() + self.bit_length > 64:
            raise SignalSpecError(f"{self.name}: bit range exceeds 64 bits")

    def shift(self) -> int:
        """Right shift that brings the signal LSB to bit 0 of the payload integer.

        Little endian reads the payload as a little-endian u64 and start_bit is
        the LSB. Big endian (Motorola) reads it big-endian and start_bit is the
        MSB in DBC sawtooth numbering.
        """
        if self.byte_order == "little":
            return self.start_bit
        msb = (self.start_bit // 8) * 8 + (7 - self.start_bit % 8)
        return 64 - msb - self.bit_length


def parse_signal_specs(text: str) -> list[SignalSpec]:
    specs = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        row = [c.strip() for c in row]
        if not row or not row[0] or row[0].startswith("#") or row[0] == "name":
            continue
        if len(row) not in (8, 9):
            raise SignalSpecError(f"line {lineno}: expected 8 or 9 fields, got {len(row)}")
        try:
            specs.append(SignalSpec(
                row[0], int(row[1]), int(row[2]), row[3].lower(),
                float(row[4]), float(row[5]), float(row[6]), float(row[7]),
                int(row[8], 16) if len(row) == 9 and row[8] else None,
            ))
        except ValueError as exc:
            raise SignalSpecError(f"line {lineno}: {exc}") from None
    return specs


def format_signal_specs(specs: Iterable[SignalSpec]) -> str:
    out = []
    for s in specs:
        row = [s.name, str(s.start_bit), str(s.bit_length), s.byte_order,
               repr(s.scale), repr(s.offset), repr(s.min), repr(s.max)]
        if s.can_id is not None:
            row.append(f"0x{s.can_id:03X}")
        out.append(",".join(row))
    return "\n".join(out) + "\n"


def extract_raw(data: bytes, spec: SignalSpec) -> int:
    word = int.from_bytes(bytes(data), spec.byte_order)
    return (word >> spec.shift()) & ((1 << spec.bit_length) - 1)


def decode_signal(frame: RawFrame, spec: SignalSpec) -> float:
    """Physical value ``raw * scale + offset`` of ``spec`` in ``frame``."""
    return extract_raw(frame.data, spec) * spec.scale + spec.offset


def encode_signal(data: bytes, spec: SignalSpec, value: float) -> bytes:
    """Write the raw integer nearest to ``value`` into a copy of ``data``."""
    raw = int(round((value - spec.offset) / spec.scale))
    raw = min(max(raw, 0), (1 << spec.bit_length) - 1)
    word = int.from_bytes(bytes(data), spec.byte_order)
    mask = ((1 << spec.bit_length) - 1) << spec.shift()
    word = (word & ~mask) | (raw << spec.shift())
    return word.to_bytes(8, spec.byte_order)


@dataclass
class FeatureMatrix:
    values: np.ndarray
    feature_names: tuple[str, ...] = FEATURE_NAMES
    timestep: float = TIMESTEP

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.feature_names = tuple(self.feature_names)
        if self.values.ndim != 2 or self.values.shape[1] != N_FEATURES:
            raise ValueError(f"expected T x {N_FEATURES} values, got shape {self.values.shape}")
        if self.values.shape[0] == 0:
            raise ValueError("feature matrix is empty")
        if len(self.feature_names) != N_FEATURES:
            raise ValueError("need one name per column")

    @property
    def T(self) -> int:
        return self.values.shape[0]

    def rows(self, start: int, stop: int) -> "FeatureMatrix":
        return FeatureMatrix(self.values[start:stop], self.feature_names, self.timestep)

    def column_ranges(self) -> np.ndarray:
        """(13, 2) physical ranges; falls back to observed min/max for unknown names."""
        out = np.empty((N_FEATURES, 2))
        for j, name in enumerate(self.feature_names):
            if name in FEATURE_RANGES:
                out[j] = FEATURE_RANGES[name]
            else:
                out[j] = self.values[:, j].min(), self.values[:, j].max()
        return out

    def to_csv(self, path, extra: dict[str, np.ndarray] | None = None) -> None:
        write_table(path, list(self.feature_names), self.values, extra)

    @classmethod
    def from_csv(cls, path) -> "FeatureMatrix":
        names, cols = read_table(path)
        return cls(np.column_stack([cols[n] for n in names[:N_FEATURES]]), names[:N_FEATURES])


def write_table(path, names: Sequence[str], values: np.ndarray, extra: dict | None = None) -> None:
    header = list(names) + list(extra or {})
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        ex = [np.asarray(v) for v in (extra or {}).values()]
        for t in range(values.shape[0]):
            fields = [repr(float(v)) for v in values[t]]
            fields += [str(int(e[t])) for e in ex]
            fh.write(",".join(fields) + "\n")


def read_table(path) -> tuple[list[str], dict[str, np.ndarray]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        names = next(reader)
        data = np.array([[float(x) for x in row] for row in reader if row], dtype=float)
    if data.size == 0:
        raise ValueError(f"{path}: no data rows")
    return names, {n: data[:, j] for j, n in enumerate(names)}


def decode_log(frames: Sequence[RawFrame], specs: Sequence[SignalSpec],
               timestep: float = TIMESTEP) -> FeatureMatrix:
    """Sample-and-hold resampling of decoded signals onto a fixed time grid.

    Each spec needs a ``can_id``. Values before a signal's first frame are
    back-filled with that first value.
    """
    if len(specs) != N_FEATURES:
        raise SignalSpecError(f"need {N_FEATURES} signal specs, got {len(specs)}")
    if not frames:
        raise ValueError("no frames to decode")
    if any(s.can_id is None for s in specs):
        raise SignalSpecError("every signal spec needs a can_id to decode a log")
    t0 = frames[0].timestamp
    n_steps = int(np.floor((frames[-1].timestamp - t0) / timestep + 1e-9)) + 1
    values = np.full((n_steps, N_FEATURES), np.nan)
    current = [np.nan] * N_FEATURES
    by_id: dict[int, list[int]] = {}
    for j, s in enumerate(specs):
        by_id.setdefault(s.can_id, []).append(j)
    k = 0
    for step in range(n_steps):
        t_end = t0 + step * timestep + 1e-9
        while k < len(frames) and frames[k].timestamp <= t_end:
            for j in by_id.get(frames[k].can_id, ()):
                current[j] = decode_signal(frames[k], specs[j])
            k += 1
        values[step] = current
    for j in range(N_FEATURES):
        col = values[:, j]
        seen = ~np.isnan(col)
        if not seen.any():
            raise ValueError(f"signal {specs[j].name} never appears in the log")
        col[: np.argmax(seen)] = col[np.argmax(seen)]
    return FeatureMatrix(values, tuple(s.name for s in specs), timestep)


# --- synthetic drive cycle -------------------------------------------------

@dataclass
class SynthConfig:
    T: int = 95_200
    seed: int = 0
    n_components: int = 6
    noise: float = 0.01
    min_period: float = 150.0   # timesteps
    max_period: float = 3000.0
    cruise_gain: float = 0.4    # weight of the slow cruise wander against manoeuvres
    event_gap: float = 400.0    # mean timesteps between acceleration / braking manoeuvres
    event_length: tuple[float, float] = (40.0, 150.0)
    event_strength: tuple[float, float] = (2.0, 4.0)
    speed_lag: float = 20.0     # timesteps, low-pass time constant of speed behind demand

    def __post_init__(self):
        if self.T < 13:
            raise ValueError(f"T must be >= 13, got {self.T}")
        if self.event_gap <= 0 or self.speed_lag < 1:
            raise ValueError("event_gap must be > 0 and speed_lag >= 1")


# Fraction of each feature's full range exercised while driving, as
# (low, high). Real signals sit well inside their DBC ranges.
_OPERATING_BAND = {
    "TQI_COR_STAT": (0.0, 2 / 3),
    "TQI_ACOR": (0.10, 0.45),
    "N": (0.045, 0.25),
    "TQI-EMS11": (0.10, 0.55),
    "TQFR": (0.05, 0.40),
    "VS": (0.0, 0.50),
    "BRAKE_ACT": (1 / 3, 2 / 3),
    "TPS": (0.05, 0.50),
    "PV_AV_CAN": (0.0, 0.45),
    "TQI_MIN": (0.05, 0.25),
    "TQI-EMS16": (0.10, 0.55),
    "TQI_TARGET": (0.10, 0.50),
    "TQI_MAX": (0.40, 0.80),
}
_STATUS = ("TQI_COR_STAT", "BRAKE_ACT")


def _latent(rng: np.random.Generator, T: int, cfg: SynthConfig) -> np.ndarray:
    t = np.arange(T, dtype=float)
    periods = np.exp(rng.uniform(np.log(cfg.min_period), np.log(cfg.max_period), cfg.n_components))
    phases = rng.uniform(0, 2 * np.pi, cfg.n_components)
    amps = rng.uniform(0.5, 1.0, cfg.n_components)
    s = (amps[:, None] * np.sin(2 * np.pi * t[None, :] / periods[:, None] + phases[:, None])).sum(0)
    return s / (amps.sum() * 0.5)


def _manoeuvres(rng: np.random.Generator, T: int, cfg: SynthConfig) -> np.ndarray:
    """Sparse half-sine bumps (positive: acceleration, negative: braking)."""
    out = np.zeros(T)
    k = 0
    while True:
        k += int(rng.exponential(cfg.event_gap))
        if k >= T:
            return out
        d = int(rng.uniform(*cfg.event_length))
        amp = rng.choice([-1.0, 1.0]) * rng.uniform(*cfg.event_strength)
        seg = np.sin(np.pi * np.arange(min(d, T - k)) / d)
        out[k:k + len(seg)] += amp * seg
        k += d


def _lowpass(x: np.ndarray, tau: float) -> np.ndarray:
    a = 1.0 / tau
    out = np.empty_like(x)
    acc = x[0]
    for k, v in enumerate(x):
        acc += a * (v - acc)
        out[k] = acc
    return out


def synthesize_dataset(config: SynthConfig | None = None, **kw) -> FeatureMatrix:
    """Attack-free 13-feature drive cycle.

    Driver demand mixes a slow cruise wander (random-phase sinusoids) with
    sparse acceleration and braking manoeuvres, squashed to (0, 1). Torque,
    throttle and pedal signals follow demand; speed and engine speed follow
    a lagged copy of it. The two status fields are three-level: the
    correction status steps 0/1/2 with demand tier and the brake field reads
    1 (released) or 2 (pressed). Continuous features get small Gaussian
    noise and everything is clipped to its physical range.
    """
    cfg = config or SynthConfig(**kw)
    rng = np.random.default_rng(cfg.seed)
    T = cfg.T
    wander = _latent(rng, T, cfg)
    events = _manoeuvres(np.random.default_rng([cfg.seed, 1]), T, cfg)
    demand = 1.0 / (1.0 + np.exp(-2.0 * (cfg.cruise_gain * wander + events)))
    speed = _lowpass(demand, cfg.speed_lag)
    speed = (speed - speed.min()) / max(np.ptp(speed), 1e-12)

    unit = {
        "TQI_COR_STAT": (1.0 + (demand > 0.7) - (demand < 0.3)) / 2,
        "TQI_ACOR": demand,
        "N": 0.7 * speed + 0.3 * demand,
        "TQI-EMS11": demand,
        "TQFR": 0.8 * demand + 0.2 * speed,
        "VS": speed,
        "BRAKE_ACT": (demand < 0.2).astype(float),
        "TPS": demand,
        "PV_AV_CAN": demand,
        "TQI_MIN": 0.9 * demand,
        "TQI-EMS16": demand,
        "TQI_TARGET": demand,
        "TQI_MAX": 0.2 + 0.8 * demand,
    }
    values = np.empty((T, N_FEATURES))
    for j, (name, lo, hi) in enumerate(FEATURES):
        blo, bhi = _OPERATING_BAND[name]
        u = unit[name]
        if name not in _STATUS:
            u = u + cfg.noise * rng.standard_normal(T)
        values[:, j] = np.clip(lo + (hi - lo) * (blo + (bhi - blo) * u), lo, hi)
    return FeatureMatrix(values)


def default_signal_specs() -> list[SignalSpec]:
    """A DBC-lite layout that can carry every feature at its full range."""
    layout = [
        # name, can_id, start, length, order, scale
        ("TQI_COR_STAT", 0x329, 0, 2, "little", 1.0),
        ("TQI_ACOR", 0x316, 8, 8, "little", 0.390625),
        ("N", 0x316, 16, 16, "little", 0.25),
        ("TQI-EMS11", 0x316, 32, 8, "little", 0.390625),
        ("TQFR", 0x316, 48, 8, "little", 0.390625),
        ("VS", 0x316, 56, 8, "little", 1.0),
        ("BRAKE_ACT", 0x329, 8, 2, "little", 1.0),
        ("TPS", 0x329, 23, 12, "big", 104.69 / 4095),
        ("PV_AV_CAN", 0x329, 32, 8, "little", 0.390625),
        ("TQI_MIN", 0x43F, 0, 8, "little", 0.390625),
        ("TQI-EMS16", 0x43F, 8, 8, "little", 0.390625),
        ("TQI_TARGET", 0x43F, 16, 8, "little", 0.390625),
        ("TQI_MAX", 0x43F, 24, 8, "little", 0.390625),
    ]
    return [SignalSpec(n, st, ln, o, sc, 0.0, FEATURE_RANGES[n][0], FEATURE_RANGES[n][1], cid)
            for n, cid, st, ln, o, sc in layout]


def encode_log(matrix: FeatureMatrix, specs: Sequence[SignalSpec] | None = None) -> list[RawFrame]:
    """One frame per CAN id per timestep carrying the quantized feature values."""
    specs = list(specs or default_signal_specs())
    ids = sorted({s.can_id for s in specs})
    frames = []
    for t in range(matrix.T):
        for cid in ids:
            data = bytes(8)
            for j, s in enumerate(specs):
                if s.can_id == cid:
                    data = encode_signal(data, s, matrix.values[t, j])
            frames.append(RawFrame(round(t * matrix.timestep, 6), cid, 8, data))
    return frames
