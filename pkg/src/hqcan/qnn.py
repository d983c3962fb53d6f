"""Readout-coupled quantum classifier over basis-encoded bit vectors.

Layout (one readout qubit after ``n_data`` data qubits)::

    X(readout)                                 readout starts in |1>
    layer l, every data qubit i:  ZX(w[l, i]) on (i, readout)  for even l
                                  XX(w[l, i]) on (i, readout)  for odd l
    measure <Y> on the readout

Every coupling carries X on the readout, so the readout X-sectors never mix.
In sector s = +-1 each coupling reduces to exp(-i s w/2 P_i) on the data
register, which stays a product state. With |psi_s> the data state of sector
s, the readout gives ``<Y> = Im <psi_+|psi_->``, a product of one 2x2 matrix
element per data qubit. :func:`predict_batch` and :func:`shift_gradients`
use this; the ``statevector`` backend runs the same circuit through
:mod:`hqcan.qsim` and the two agree to rounding.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import qsim
from .optim import Adam
from .serialize import read_arrays, save_arrays

N_DATA = 16

_I = np.eye(2, dtype=complex)
_PAULI = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def layer_kinds(n_layers: int) -> list[str]:
    return ["ZX" if l % 2 == 0 else "XX" for l in range(n_layers)]


@dataclass
class QnnModel:
    weights: np.ndarray  # (n_layers, n_data)
    seed: int = 0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.ndim != 2 or self.weights.shape[0] < 1:
            raise ValueError(f"weights must be (n_layers >= 1, n_data), got {self.weights.shape}")

    @classmethod
    def init(cls, n_layers: int, seed: int = 0, n_data: int = N_DATA) -> "QnnModel":
        if n_layers < 1:
            raise ValueError("n_layers must be >= 1")
        rng = np.random.default_rng(seed)
        return cls(rng.normal(0.0, 0.1, size=(n_layers, n_data)), seed)

    @property
    def n_layers(self) -> int:
        return self.weights.shape[0]

    @property
    def n_data(self) -> int:
        return self.weights.shape[1]

    @property
    def readout(self) -> int:
        return self.n_data

    @property
    def n_qubits(self) -> int:
        return self.n_data + 1

    @property
    def n_params(self) -> int:
        return self.weights.size

    def circuit(self) -> qsim.Circuit:
        return build_qnn_circuit(self.n_layers, self.n_data, self.weights)

    def save(self, stem, config: "QnnConfig | None" = None) -> None:
        stem = Path(stem)
        save_arrays(stem.with_suffix(".bin"), {"weights": self.weights})
        meta = {
            "n_layers": self.n_layers,
            "n_data": self.n_data,
            "n_qubits": self.n_qubits,
            "n_params": self.n_params,
            "layer_kinds": layer_kinds(self.n_layers),
            "readout_observable": "Y",
            "seed": self.seed,
            "config": asdict(config) if config else None,
        }
        stem.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, stem) -> "QnnModel":
        stem = Path(stem)
        meta = json.loads(stem.with_suffix(".json").read_text())
        return cls(read_arrays(stem.with_suffix(".bin"))["weights"], meta["seed"])


def build_qnn_circuit(n_layers: int, n_data: int = N_DATA, weights=None) -> qsim.Circuit:
    """Circuit with one trainable angle ``w{l}_{i}`` per (layer, data qubit)."""
    if n_layers < 1:
        raise ValueError("n_layers must be >= 1")
    w = np.zeros((n_layers, n_data)) if weights is None else np.asarray(weights, dtype=float)
    readout = n_data
    params = {f"w{l}_{i}": float(w[l, i]) for l in range(n_layers) for i in range(n_data)}
    circ = qsim.Circuit(n_data + 1, [qsim.Gate("X", (readout,))], params)
    for l, kind in enumerate(layer_kinds(n_layers)):
        for i in range(n_data):
            circ.append(qsim.Gate(kind, (i, readout), param_id=f"w{l}_{i}"))
    return circ


def observable(model_or_n_data) -> tuple[str, int]:
    n = model_or_n_data.n_data if isinstance(model_or_n_data, QnnModel) else int(model_or_n_data)
    return ("Y", n)


# --- factorized evaluator ------------------------------------------------

def _rot(kind: str, angle: np.ndarray) -> np.ndarray:
    """exp(-i angle/2 P) for an array of angles -> (..., 2, 2)."""
    p = _PAULI[kind[0]]
    c = np.cos(angle / 2)[..., None, None]
    s = np.sin(angle / 2)[..., None, None]
    return c * _I - 1j * s * p


def _sector_unitaries(weights: np.ndarray):
    """Per-layer rotations for sectors +1 and -1, shape (L, n, 2, 2) each."""
    kinds = layer_kinds(weights.shape[0])
    plus = np.stack([_rot(k, weights[l]) for l, k in enumerate(kinds)])
    minus = np.stack([_rot(k, -weights[l]) for l, k in enumerate(kinds)])
    return plus, minus


def _chain(mats: np.ndarray) -> np.ndarray:
    """Ordered product A_{L-1} ... A_0 along axis 0."""
    out = mats[0]
    for m in mats[1:]:
        out = m @ out
    return out


def _overlap_matrices(weights: np.ndarray) -> np.ndarray:
    plus, minus = _sector_unitaries(weights)
    vp, vm = _chain(plus), _chain(minus)
    return np.conj(np.swapaxes(vp, -1, -2)) @ vm  # (n, 2, 2)


def _diag_elements(mats: np.ndarray, bits: np.ndarray) -> np.ndarray:
    """mats (..., n, 2, 2), bits (B, n) -> mats[..., i, b_i, b_i] with batch leading."""
    diag = np.diagonal(mats, axis1=-2, axis2=-1)  # (..., n, 2)
    n = bits.shape[1]
    return np.take_along_axis(
        np.broadcast_to(diag, (bits.shape[0],) + diag.shape),
        bits.reshape((bits.shape[0],) + (1,) * (diag.ndim - 2) + (n, 1)).astype(np.intp),
        axis=-1,
    )[..., 0]


def _as_bits(bits, n_data: int) -> np.ndarray:
    b = np.atleast_2d(np.asarray(bits, dtype=np.int64))
    if b.shape[1] != n_data:
        raise ValueError(f"expected {n_data} bits per sample, got {b.shape[1]}")
    if np.any((b != 0) & (b != 1)):
        raise ValueError("bits must be 0 or 1")
    return b


def predict_batch(model: QnnModel, bits) -> np.ndarray:
    b = _as_bits(bits, model.n_data)
    d = _diag_elements(_overlap_matrices(model.weights), b)  # (B, n)
    return np.prod(d, axis=1).imag


def shift_gradients(model: QnnModel, bits) -> tuple[np.ndarray, np.ndarray]:
    """Predictions (B,) and parameter-shift gradients (B, L, n).

    Each angle is evaluated at +-pi/2; only the shifted qubit's factor
    changes, so the rest of the product is reused via prefix/suffix products.
    """
    w = model.weights
    L, n = w.shape
    b = _as_bits(bits, n)
    plus, minus = _sector_unitaries(w)
    eye = np.broadcast_to(_I, (n, 2, 2))

    def prefix_suffix(mats):
        pre = [eye]
        for l in range(L - 1):
            pre.append(mats[l] @ pre[-1])
        suf = [eye]
        for l in range(L - 1, 0, -1):
            suf.append(suf[-1] @ mats[l])
        return np.stack(pre), np.stack(suf[::-1])  # pre[l] = A_{l-1}..A_0, suf[l] = A_{L-1}..A_{l+1}

    pre_p, suf_p = prefix_suffix(plus)
    pre_m, suf_m = prefix_suffix(minus)
    kinds = layer_kinds(L)
    shifted = np.empty((L, n, 2, 2, 2), dtype=complex)  # (l, i, shift sign, 2, 2)
    for k, delta in enumerate((math.pi / 2, -math.pi / 2)):
        ap = np.stack([_rot(kinds[l], w[l] + delta) for l in range(L)])
        am = np.stack([_rot(kinds[l], -(w[l] + delta)) for l in range(L)])
        vp = suf_p @ ap @ pre_p
        vm = suf_m @ am @ pre_m
        shifted[:, :, k] = np.conj(np.swapaxes(vp, -1, -2)) @ vm

    base = _overlap_matrices(w)
    d = _diag_elements(base, b)  # (B, n)
    ones = np.ones((d.shape[0], 1), dtype=complex)
    left = np.cumprod(np.concatenate([ones, d[:, :-1]], axis=1), axis=1)
    right = np.cumprod(np.concatenate([ones, d[:, :0:-1]], axis=1), axis=1)[:, ::-1]
    others = left * right  # product over k != i
    preds = np.prod(d, axis=1).imag

    sh = np.moveaxis(shifted, 2, 0)  # (2, L, n, 2, 2)
    ds = np.stack([_diag_elements(sh[k], b) for k in range(2)], axis=-1)  # (B, L, n, 2)
    e = (others[:, None, :, None] * ds).imag
    return preds, 0.5 * (e[..., 0] - e[..., 1])


def qnn_predict(model: QnnModel, bits, backend: str = "factorized") -> float:
    """Readout expectation in [-1, 1]; > 0 means attack."""
    if backend == "statevector":
        b = list(_as_bits(bits, model.n_data)[0]) + [0]
        return qsim.circuit_expectation(model.circuit(), b, observable(model))
    if backend != "factorized":
        raise ValueError(f"unknown backend {backend!r}")
    return float(predict_batch(model, bits)[0])


def statevector_gradient(model: QnnModel, bits) -> np.ndarray:
    b = list(_as_bits(bits, model.n_data)[0]) + [0]
    g = qsim.parameter_shift_grad(model.circuit(), b, observable(model))
    return g.reshape(model.weights.shape)


def hinge_loss(pred, label):
    """max(0, 1 - y pred) with y = 2 label - 1; broadcasts over arrays."""
    y = 2.0 * np.asarray(label, dtype=float) - 1.0
    out = np.maximum(0.0, 1.0 - y * np.asarray(pred, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def classify(preds) -> np.ndarray:
    return (np.asarray(preds) > 0).astype(np.int64)


@dataclass
class QnnConfig:
    epochs: int = 20
    batch_size: int = 1
    learning_rate: float = 0.002
    seed: int = 0

    def __post_init__(self):
        if self.epochs <= 0:
            raise ValueError("epochs must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class TrainHistory:
    loss: list[float] = field(default_factory=list)
    accuracy: list[float] = field(default_factory=list)

    def records(self) -> list[dict]:
        return [{"epoch": e + 1, "loss": l, "train_acc": a}
                for e, (l, a) in enumerate(zip(self.loss, self.accuracy))]


def qnn_train(bits, labels, model: QnnModel, config: QnnConfig) -> tuple[QnnModel, TrainHistory]:
    """Minimize mean hinge loss with Adam on parameter-shift gradients.

    The hinge subgradient is taken as 0 at the kink. Epoch metrics are over
    the full training set after the epoch's updates. The input model is not
    modified.
    """
    x = _as_bits(bits, model.n_data)
    y = np.asarray(labels, dtype=np.int64)
    if len(x) == 0 or len(x) != len(y):
        raise ValueError("need a nonempty dataset with one label per sample")
    ys = 2.0 * y - 1.0
    model = QnnModel(model.weights.copy(), model.seed)
    params = {"w": model.weights}
    opt = Adam(lr=config.learning_rate)
    rng = np.random.default_rng(config.seed)
    hist = TrainHistory()
    for _ in range(config.epochs):
        order = rng.permutation(len(x))
        for start in range(0, len(x), config.batch_size):
            idx = order[start:start + config.batch_size]
            preds, grads = shift_gradients(model, x[idx])
            active = (ys[idx] * preds < 1.0).astype(float)
            dpred = -ys[idx] * active / len(idx)
            opt.step(params, {"w": np.tensordot(dpred, grads, axes=1)})
        preds = predict_batch(model, x)
        hist.loss.append(float(np.mean(hinge_loss(preds, y))))
        hist.accuracy.append(float(np.mean(classify(preds) == y)))
    return model, hist
