"""Single-layer LSTM over the 13 rows of a CAN window with a sigmoid head.

Gate blocks in the packed weights are ordered input, forget, cell, output.
"""
from __future__ import annotations

import numpy as np

from .train import Params, TrainConfig, TrainHistory, bce_from_logits, check_finite, fit, glorot


def init_lstm(seed: int = 0, n_inputs: int = 13, hidden: int = 64) -> Params:
    rng = np.random.default_rng(seed)
    return {
        "wx": glorot(rng, (n_inputs, 4 * hidden), n_inputs, 4 * hidden),
        "wh": glorot(rng, (hidden, 4 * hidden), hidden, 4 * hidden),
        "b": np.zeros(4 * hidden),
        "head_w": glorot(rng, (hidden, 1), hidden, 1),
        "head_b": np.zeros(1),
    }


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def lstm_states(params: Params, windows: np.ndarray):
    """Run the recurrence; returns per-step caches for backprop."""
    x = np.asarray(windows, dtype=float)
    B, T, _ = x.shape
    H = params["wh"].shape[0]
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    steps = []
    for t in range(T):
        a = x[:, t] @ params["wx"] + h @ params["wh"] + params["b"]
        i = _sigmoid(a[:, :H])
        f = _sigmoid(a[:, H:2 * H])
        g = np.tanh(a[:, 2 * H:3 * H])
        o = _sigmoid(a[:, 3 * H:])
        c_prev, h_prev = c, h
        c = f * c_prev + i * g
        tc = np.tanh(c)
        h = o * tc
        steps.append((x[:, t], h_prev, c_prev, i, f, g, o, tc))
    return h, c, steps


def _logits(params, windows):
    h, _, steps = lstm_states(params, windows)
    return h @ params["head_w"] + params["head_b"], h, steps


def lstm_predict(params: Params, windows: np.ndarray) -> np.ndarray:
    return _sigmoid(_logits(params, windows)[0][:, 0])


def lstm_forward(params: Params, window: np.ndarray) -> float:
    """Probability of attack for one (T, 13) time-major window."""
    check_finite(params)
    return float(lstm_predict(params, np.asarray(window, dtype=float)[None])[0])


def lstm_loss_and_grad(params: Params, windows: np.ndarray, labels: np.ndarray) -> tuple[float, Params]:
    logits, h, steps = _logits(params, windows)
    loss, dlogits = bce_from_logits(logits, np.asarray(labels, dtype=float))
    g = {k: np.zeros_like(v) for k, v in params.items()}
    g["head_w"] = h.T @ dlogits
    g["head_b"] = dlogits.sum(axis=0)
    dh = dlogits @ params["head_w"].T
    dc = np.zeros_like(dh)
    for x_t, h_prev, c_prev, i, f, gg, o, tc in reversed(steps):
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        da = np.concatenate([
            dc * gg * i * (1.0 - i),
            dc * c_prev * f * (1.0 - f),
            dc * i * (1.0 - gg * gg),
            do * o * (1.0 - o),
        ], axis=1)
        g["wx"] += x_t.T @ da
        g["wh"] += h_prev.T @ da
        g["b"] += da.sum(axis=0)
        dh = da @ params["wh"].T
        dc = dc * f
    return loss, g


def lstm_train(windows: np.ndarray, labels: np.ndarray, config: TrainConfig | None = None,
               params: Params | None = None, hidden: int = 64) -> tuple[Params, TrainHistory]:
    """Backpropagation through time over each window, Adam updates."""
    config = config or TrainConfig(epochs=100)
    x = np.asarray(windows, dtype=float)
    if params is None:
        params = init_lstm(config.seed, x.shape[-1], hidden)
    check_finite(params)
    return fit(params, lstm_loss_and_grad, lstm_predict, x, np.asarray(labels), config)
