"""13x13 CAN image -> 4x4 feature map extractor with a temporary dense head.

    conv 3x3x8 (valid) + ReLU   13x13x1 -> 11x11x8
    max pool 2x2 stride 2       11x11x8 -> 5x5x8 (last row/column dropped)
    conv 2x2x1 (valid) + sigmoid 5x5x8  -> 4x4
    dense 16 -> 1 + sigmoid     head, used only to train the extractor
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .train import Params, TrainConfig, TrainHistory, bce_from_logits, check_finite, fit, glorot, gradient_check


def init_cnn(seed: int = 0, n_filters: int = 8) -> Params:
    rng = np.random.default_rng(seed)
    return {
        "conv1_w": glorot(rng, (3, 3, 1, n_filters), 9, 9 * n_filters),
        "conv1_b": np.zeros(n_filters),
        "conv2_w": glorot(rng, (2, 2, n_filters, 1), 4 * n_filters, 4),
        "conv2_b": np.zeros(1),
        "head_w": glorot(rng, (16, 1), 16, 1),
        "head_b": np.zeros(1),
    }


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _conv(x, w, b):
    k = w.shape[0]
    patches = sliding_window_view(x, (k, k), axis=(1, 2))  # (B, Ho, Wo, C, k, k)
    return np.einsum("bijckl,klco->bijo", patches, w, optimize=True) + b, patches


def _conv_back(dz, patches, w, x_shape):
    k = w.shape[0]
    dw = np.einsum("bijckl,bijo->klco", patches, dz, optimize=True)
    db = dz.sum(axis=(0, 1, 2))
    dx = np.zeros(x_shape)
    ho, wo = dz.shape[1:3]
    for a in range(k):
        for c in range(k):
            dx[:, a:a + ho, c:c + wo, :] += dz @ w[a, c].T
    return dw, db, dx


def _pool(x):
    B, H, W, C = x.shape
    h, w = H // 2, W // 2
    blocks = x[:, :2 * h, :2 * w].reshape(B, h, 2, w, 2, C).transpose(0, 1, 3, 5, 2, 4).reshape(B, h, w, C, 4)
    idx = blocks.argmax(axis=-1)
    return np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0], idx


def _pool_back(dout, idx, x_shape):
    B, H, W, C = x_shape
    h, w = H // 2, W // 2
    blocks = np.zeros((B, h, w, C, 4))
    np.put_along_axis(blocks, idx[..., None], dout[..., None], axis=-1)
    dx = np.zeros(x_shape)
    dx[:, :2 * h, :2 * w] = blocks.reshape(B, h, w, C, 2, 2).transpose(0, 1, 4, 2, 5, 3).reshape(B, 2 * h, 2 * w, C)
    return dx


def _forward(params: Params, images: np.ndarray):
    x = np.asarray(images, dtype=float)[..., None]
    z1, p1 = _conv(x, params["conv1_w"], params["conv1_b"])
    a1 = np.maximum(z1, 0.0)
    pooled, idx = _pool(a1)
    z2, p2 = _conv(pooled, params["conv2_w"], params["conv2_b"])
    fmap = _sigmoid(z2[..., 0])
    logits = fmap.reshape(len(x), -1) @ params["head_w"] + params["head_b"]
    return fmap, logits, (x, z1, p1, a1, idx, pooled, p2)


def cnn_features(params: Params, images: np.ndarray) -> np.ndarray:
    """Feature maps (N, 4, 4) in (0, 1)."""
    check_finite(params)
    return _forward(params, images)[0]


def cnn_predict(params: Params, images: np.ndarray) -> np.ndarray:
    return _sigmoid(_forward(params, images)[1][:, 0])


def cnn_forward(params: Params, image: np.ndarray) -> tuple[np.ndarray, float]:
    """Single 13x13 image -> (4x4 feature map, head probability)."""
    check_finite(params)
    fmap, logits, _ = _forward(params, np.asarray(image, dtype=float)[None])
    return fmap[0], float(_sigmoid(logits[0, 0]))


def cnn_loss_and_grad(params: Params, images: np.ndarray, labels: np.ndarray) -> tuple[float, Params]:
    fmap, logits, (x, z1, p1, a1, idx, pooled, p2) = _forward(params, images)
    B = len(x)
    loss, dlogits = bce_from_logits(logits, np.asarray(labels, dtype=float))
    flat = fmap.reshape(B, -1)
    g = {"head_w": flat.T @ dlogits, "head_b": dlogits.sum(axis=0)}
    dz2 = ((dlogits @ params["head_w"].T).reshape(fmap.shape) * fmap * (1.0 - fmap))[..., None]
    g["conv2_w"], g["conv2_b"], dpooled = _conv_back(dz2, p2, params["conv2_w"], pooled.shape)
    da1 = _pool_back(dpooled, idx, a1.shape)
    g["conv1_w"], g["conv1_b"], _ = _conv_back(da1 * (z1 > 0), p1, params["conv1_w"], x.shape)
    return loss, g


def cnn_train(images: np.ndarray, labels: np.ndarray, config: TrainConfig | None = None,
              params: Params | None = None) -> tuple[Params, TrainHistory]:
    """Train extractor + head on binary cross-entropy with Adam."""
    config = config or TrainConfig(epochs=150, learning_rate=3e-3)
    if params is None:
        params = init_cnn(config.seed)
    check_finite(params)
    return fit(params, cnn_loss_and_grad, cnn_predict, np.asarray(images, dtype=float),
               np.asarray(labels), config)


def branch_pattern(params: Params, images: np.ndarray) -> bytes:
    """ReLU signs and pooling argmax; the loss is smooth while these are fixed."""
    _, _, (x, z1, p1, a1, idx, pooled, p2) = _forward(params, images)
    return np.packbits(z1 > 0).tobytes() + idx.astype(np.int8).tobytes()


def backprop_check(params: Params, image: np.ndarray, label, h: float = 1e-4,
                   n_checks: int = 40, seed: int = 0) -> float:
    """Max relative error between backprop and central differences.

    Probes that straddle a ReLU or pooling kink are excluded.
    """
    x = np.asarray(image, dtype=float)
    if x.ndim == 2:
        x = x[None]
    y = np.atleast_1d(np.asarray(label, dtype=float))
    return gradient_check(cnn_loss_and_grad, params, x, y, h=h, n_checks=n_checks, seed=seed,
                          pattern=branch_pattern).max_rel_error
