"""CAN images: normalization, 13x13 windows, 4x4 pooling and 0.5 thresholding."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .can_data import N_FEATURES, FeatureMatrix

WINDOW = 13
MAJORITY = 7


@dataclass(frozen=True)
class NormStats:
    min: np.ndarray
    max: np.ndarray

    def to_dict(self) -> dict:
        return {"min": self.min.tolist(), "max": self.max.tolist()}


def _values(matrix) -> np.ndarray:
    return matrix.values if isinstance(matrix, FeatureMatrix) else np.asarray(matrix, dtype=float)


def compute_norm_stats(matrix) -> NormStats:
    v = _values(matrix)
    if v.ndim != 2 or v.shape[0] == 0:
        raise ValueError("cannot compute stats of an empty matrix")
    return NormStats(v.min(axis=0), v.max(axis=0))


def normalize(matrix, stats: NormStats) -> np.ndarray:
    """(v - min) / (max - min) clamped to [0, 1]; constant columns map to 0."""
    v = _values(matrix)
    span = stats.max - stats.min
    safe = np.where(span > 0, span, 1.0)
    out = np.where(span > 0, (v - stats.min) / safe, 0.0)
    return np.clip(out, 0.0, 1.0)


def denormalize(norm: np.ndarray, stats: NormStats) -> np.ndarray:
    return stats.min + np.asarray(norm) * (stats.max - stats.min)


@dataclass(frozen=True)
class CanImage:
    pixels: np.ndarray  # (13, 13), row = timestep, column = feature
    label: int
    window_start: int


@dataclass
class CanImageSet:
    pixels: np.ndarray        # (N, 13, 13)
    labels: np.ndarray        # (N,) int
    window_starts: np.ndarray  # (N,) int

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, k: int) -> CanImage:
        return CanImage(self.pixels[k], int(self.labels[k]), int(self.window_starts[k]))

    def __iter__(self):
        return (self[k] for k in range(len(self)))


def make_images(norm_matrix, labels, offset: int = 0) -> CanImageSet:
    """Non-overlapping 13-row windows; a window is an attack if >= 7 rows are.

    ``offset`` is added to the recorded window starts (for region slices).
    """
    v = np.asarray(norm_matrix, dtype=float)
    lab = np.asarray(labels).astype(bool)
    if v.ndim != 2 or v.shape[1] != N_FEATURES:
        raise ValueError(f"expected T x {N_FEATURES} matrix, got {v.shape}")
    if len(lab) != len(v):
        raise ValueError("labels and matrix lengths differ")
    T = len(v)
    if T < WINDOW:
        raise ValueError(f"need at least {WINDOW} timesteps, got {T}")
    n = T // WINDOW
    pixels = v[: n * WINDOW].reshape(n, WINDOW, N_FEATURES).copy()
    votes = lab[: n * WINDOW].reshape(n, WINDOW).sum(axis=1)
    starts = offset + WINDOW * np.arange(n)
    return CanImageSet(pixels, (votes >= MAJORITY).astype(np.int64), starts)


def _pool_matrix(n_in: int = WINDOW, n_out: int = 4) -> np.ndarray:
    """(n_out, n_in) fractional-overlap weights; each row sums to 1."""
    edges = np.linspace(0.0, n_in, n_out + 1)
    w = np.zeros((n_out, n_in))
    for r in range(n_out):
        for j in range(n_in):
            w[r, j] = max(0.0, min(edges[r + 1], j + 1) - max(edges[r], j))
    return w / (n_in / n_out)


_POOL = _pool_matrix()


def resize_4x4(image: np.ndarray) -> np.ndarray:
    """Area-weighted average pooling of 13x13 image(s) onto a 4x4 grid."""
    x = np.asarray(image, dtype=float)
    return np.einsum("ri,...ij,cj->...rc", _POOL, x, _POOL)


def binarize(fmap: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Row-major bit vector(s): 1 where value > threshold (ties give 0)."""
    x = np.asarray(fmap, dtype=float)
    return (x > threshold).astype(np.int64).reshape(x.shape[:-2] + (-1,))


# --- persistence -----------------------------------------------------------
# binary: 16-byte header b"CIMG" | u32 version | u32 count | u32 width,
# then count*width*width float64 pixels, count int64 labels, count int64 starts.

_MAGIC = b"CIMG"


def save_images_binary(path, images: CanImageSet) -> None:
    n, w, _ = images.pixels.shape
    with open(path, "wb") as fh:
        fh.write(_MAGIC + struct.pack("<III", 1, n, w))
        fh.write(np.ascontiguousarray(images.pixels, dtype="<f8").tobytes())
        fh.write(np.asarray(images.labels, dtype="<i8").tobytes())
        fh.write(np.asarray(images.window_starts, dtype="<i8").tobytes())


def load_images_binary(path) -> CanImageSet:
    blob = Path(path).read_bytes()
    if blob[:4] != _MAGIC:
        raise ValueError(f"{path}: not a CAN image file")
    version, n, w = struct.unpack_from("<III", blob, 4)
    if version != 1:
        raise ValueError(f"{path}: unsupported version {version}")
    pos = 16
    pixels = np.frombuffer(blob, "<f8", n * w * w, pos).reshape(n, w, w).copy()
    pos += 8 * n * w * w
    labels = np.frombuffer(blob, "<i8", n, pos).copy()
    starts = np.frombuffer(blob, "<i8", n, pos + 8 * n).copy()
    return CanImageSet(pixels, labels, starts)


def save_images_csv(path, images: CanImageSet) -> None:
    n, w, _ = images.pixels.shape
    header = [f"p{r}_{c}" for r in range(w) for c in range(w)] + ["label"]
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for k in range(n):
            row = [repr(float(x)) for x in images.pixels[k].ravel()] + [str(int(images.labels[k]))]
            fh.write(",".join(row) + "\n")


def load_images_csv(path) -> CanImageSet:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    w = int(round(np.sqrt(data.shape[1] - 1)))
    pixels = data[:, :-1].reshape(-1, w, w)
    return CanImageSet(pixels, data[:, -1].astype(np.int64), WINDOW * np.arange(len(data)))
