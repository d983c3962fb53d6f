"""Amplitude-shift attack injection and per-timestep labels.

An interval adds one signed constant to one feature for a span of
timesteps; everything else is left untouched and attacked values are not
clipped, so the feature's first differences inside the interval are those
of the clean signal.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .can_data import N_FEATURES, FeatureMatrix


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class AttackInterval:
    feature_index: int
    start: int
    length: int
    shift: float | None = None  # None until drawn

    def __post_init__(self):
        if not 0 <= self.feature_index < N_FEATURES:
            raise ScheduleError(f"feature_index {self.feature_index} out of range")
        if self.start < 0 or self.length <= 0:
            raise ScheduleError(f"bad interval start={self.start} length={self.length}")

    @property
    def stop(self) -> int:
        return self.start + self.length


@dataclass(frozen=True)
class AttackSchedule:
    intervals: tuple[AttackInterval, ...]
    split_point: int
    T: int

    def __post_init__(self):
        for iv in self.intervals:
            if iv.stop > self.T:
                raise ScheduleError(f"interval {iv} runs past T={self.T}")
        spans = sorted((iv.start, iv.stop) for iv in self.intervals)
        for (a0, a1), (b0, b1) in zip(spans, spans[1:]):
            if b0 < a1:
                raise ScheduleError(f"intervals [{a0},{a1}) and [{b0},{b1}) overlap")

    def region(self, which: str) -> list[AttackInterval]:
        if which == "train":
            return [iv for iv in self.intervals if iv.stop <= self.split_point]
        return [iv for iv in self.intervals if iv.start >= self.split_point]

    def labels(self) -> np.ndarray:
        lab = np.zeros(self.T, dtype=bool)
        for iv in self.intervals:
            lab[iv.start:iv.stop] = True
        return lab

    def to_json(self) -> str:
        return json.dumps({
            "T": self.T,
            "split_point": self.split_point,
            "intervals": [asdict(iv) for iv in self.intervals],
        }, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "AttackSchedule":
        d = json.loads(text)
        return cls(tuple(AttackInterval(**iv) for iv in d["intervals"]), d["split_point"], d["T"])

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "AttackSchedule":
        return cls.from_json(Path(path).read_text())


def _place(rng: np.random.Generator, lo: int, hi: int, length: int) -> list[int]:
    """Start offsets of 13 disjoint, randomly spaced intervals inside [lo, hi)."""
    free = (hi - lo) - N_FEATURES * length
    cuts = np.sort(rng.integers(0, free + 1, size=N_FEATURES))
    return [lo + int(c) + k * length for k, c in enumerate(cuts)]


def build_schedule(T: int, train_len: int, attack_len_train: int, attack_len_test: int,
                   seed: int = 0) -> AttackSchedule:
    """One interval per feature in each of the train and test regions.

    All 26 intervals are pairwise disjoint in time; the order in which
    features are attacked is a seeded permutation per region.
    """
    if attack_len_train <= 0 or attack_len_test <= 0:
        raise ScheduleError("attack lengths must be positive")
    if not 0 < train_len < T:
        raise ScheduleError(f"train_len must be in (0, T), got {train_len} for T={T}")
    if N_FEATURES * attack_len_train > train_len:
        raise ScheduleError(f"{N_FEATURES} x {attack_len_train} attack steps do not fit in train region of {train_len}")
    if N_FEATURES * attack_len_test > T - train_len:
        raise ScheduleError(f"{N_FEATURES} x {attack_len_test} attack steps do not fit in test region of {T - train_len}")
    rng = np.random.default_rng(seed)
    intervals = []
    for lo, hi, length in ((0, train_len, attack_len_train), (train_len, T, attack_len_test)):
        features = rng.permutation(N_FEATURES)
        for f, start in zip(features, _place(rng, lo, hi, length)):
            intervals.append(AttackInterval(int(f), start, length))
    return AttackSchedule(tuple(intervals), train_len, T)


def draw_shifts(schedule: AttackSchedule, ranges: np.ndarray,
                shift_fraction_range: tuple[float, float] = (0.2, 0.5), seed: int = 0) -> AttackSchedule:
    """Fill in missing shifts: |c| ~ U[lo, hi] * feature range, random sign."""
    lo, hi = shift_fraction_range
    if not 0 < lo <= hi:
        raise ScheduleError(f"need 0 < lo <= hi, got {shift_fraction_range}")
    rng = np.random.default_rng(seed)
    out = []
    for iv in schedule.intervals:
        frac = rng.uniform(lo, hi)
        sign = 1.0 if rng.random() < 0.5 else -1.0
        if iv.shift is None:
            span = ranges[iv.feature_index, 1] - ranges[iv.feature_index, 0]
            iv = replace(iv, shift=float(sign * frac * span))
        out.append(iv)
    return replace(schedule, intervals=tuple(out))


def inject(matrix: FeatureMatrix, schedule: AttackSchedule,
           shift_fraction_range: tuple[float, float] = (0.2, 0.5), seed: int = 0,
           force_shift: float | None = None) -> tuple[FeatureMatrix, np.ndarray]:
    """Add each interval's constant to its feature; return (attacked matrix, labels).

    Intervals without a shift get one from :func:`draw_shifts`. ``force_shift``
    overrides every constant (0 gives an identity injection with labels set).
    """
    if matrix.T != schedule.T:
        raise ScheduleError(f"schedule built for T={schedule.T}, matrix has {matrix.T} rows")
    if force_shift is None:
        schedule = draw_shifts(schedule, matrix.column_ranges(), shift_fraction_range, seed)
    values = matrix.values.copy()
    for iv in schedule.intervals:
        c = force_shift if force_shift is not None else iv.shift
        if c:
            values[iv.start:iv.stop, iv.feature_index] += c
    return FeatureMatrix(values, matrix.feature_names, matrix.timestep), schedule.labels()
