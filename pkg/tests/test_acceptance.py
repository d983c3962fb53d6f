"""Acceptance checks. Each test prints one PASS/FAIL line with the measured value.

Run ``pytest tests/test_acceptance.py -s`` to see the lines. The desk-scale
ordering runs three full experiments (a few minutes on one core).
"""
import filecmp
import json
import time

import numpy as np
import pytest

import oracles
from hqcan import attack, can_data, imaging, nn, qnn, qsim
from hqcan.harness import config as cfgmod, run_experiment
from hqcan.nn import cnn, lstm
from hqcan.nn.train import gradient_check

SEEDS = (0, 1, 2)


def verdict(name: str, ok: bool, detail: str) -> None:
    print(f"\n{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    assert ok, f"{name}: {detail}"


# 1 ------------------------------------------------------------------------------

def test_circuits_match_dense_oracle():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for k in range(1000):
        n = int(rng.integers(1, 6))
        c = qsim.random_circuit(n, int(rng.integers(1, 30)), rng)
        bits = rng.integers(0, 2, n)
        psi = qsim.run_circuit(c, bits).amplitudes
        worst = max(worst, float(np.abs(psi - oracles.dense_state(c, bits)).max()))
    dt = time.perf_counter() - t0
    verdict("simulator vs dense oracle (1000 circuits, n<=5)", worst <= 1e-10 and dt < 60,
            f"max amplitude error {worst:.2e} (tol 1e-10), {dt:.1f}s (limit 60s)")


# 2 ------------------------------------------------------------------------------

def test_parameter_shift_matches_finite_differences():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        c = qsim.random_circuit(5, 20, rng, n_params=6)
        bits = rng.integers(0, 2, 5)
        obs = ("XYZ"[rng.integers(3)], int(rng.integers(5)))
        grad = qsim.parameter_shift_grad(c, bits, obs)
        names = list(c.params)

        def f(x):
            c.set_params(x)
            return qsim.circuit_expectation(c, bits, obs)

        x0 = np.array([c.params[p] for p in names])
        fd = oracles.central_difference(f, x0, 1e-5)
        c.set_params(x0)
        worst = max(worst, float(np.abs(grad - fd).max()))
    verdict("parameter shift vs FD h=1e-5 (100 circuits, 5 qubits)", worst <= 1e-6,
            f"max abs error {worst:.2e} (tol 1e-6)")


def test_classical_backprop_matches_finite_differences():
    rng = np.random.default_rng(11)
    X = rng.random((6, 13, 13))
    y = np.array([0, 1, 0, 1, 1, 0])
    c = gradient_check(cnn.cnn_loss_and_grad, nn.init_cnn(3), X, y, h=1e-5, n_checks=120,
                       pattern=cnn.branch_pattern)
    l = gradient_check(lstm.lstm_loss_and_grad, nn.init_lstm(3), X, y, h=1e-5, n_checks=120)
    ok = c.max_rel_error <= 1e-4 and l.max_rel_error <= 1e-4 and c.n_checked > 60
    verdict("CNN/LSTM backprop vs FD h=1e-5", ok,
            f"CNN rel {c.max_rel_error:.2e} over {c.n_checked} entries ({c.n_skipped} at kinks), "
            f"LSTM rel {l.max_rel_error:.2e} over {l.n_checked} at |g|={l.worst_grad:.1e} (tol 1e-4)")


# 3 ------------------------------------------------------------------------------

def test_full_length_schedule_counts():
    t0 = time.perf_counter()
    clean = can_data.synthesize_dataset(T=95_200, seed=0)
    sched = attack.build_schedule(95_200, 60_000, 2000, 1000, seed=0)
    _, lab = attack.inject(clean, sched, seed=0)
    dt = time.perf_counter() - t0
    counts = (int(lab[:60_000].sum()), int((~lab[:60_000]).sum()),
              int(lab[60_000:].sum()), int((~lab[60_000:]).sum()))
    ok = counts == (26_000, 34_000, 13_000, 22_200) and dt < 5
    verdict("attack/normal counts at T=95,200", ok,
            f"train {counts[0]}/{counts[1]}, test {counts[2]}/{counts[3]}, {dt:.2f}s (limit 5s)")


# 4 ------------------------------------------------------------------------------

def test_circuit_sizes():
    hybrid = qnn.QnnModel.init(6)
    qo = qnn.QnnModel.init(8)
    ok = (hybrid.n_qubits, hybrid.n_params, qo.n_params) == (17, 96, 128)
    verdict("QNN sizes", ok, f"hybrid {hybrid.n_qubits} qubits / {hybrid.n_params} params, "
                             f"quantum-only {qo.n_params} params")


# 5 ------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def desk_runs(tmp_path_factory):
    runs = {}
    for seed in SEEDS:
        out = tmp_path_factory.mktemp(f"desk{seed}")
        cfg = cfgmod.desk_config().with_seed(seed).with_output(str(out))
        t0 = time.perf_counter()
        rep = run_experiment(cfg)
        runs[seed] = (out, rep, time.perf_counter() - t0)
    return runs


def _mean_acc(runs, model):
    accs = [rep["models"][model]["test"]["accuracy"] for _, rep, _ in runs.values()]
    return float(np.mean(accs)), " ".join(f"{a:.3f}" for a in accs)


def test_desk_hybrid_accuracy(desk_runs):
    m, each = _mean_acc(desk_runs, "hybrid")
    verdict("desk hybrid mean test accuracy >= 0.85", m >= 0.85, f"{m:.4f} (seeds: {each})")


def test_desk_hybrid_beats_quantum_only(desk_runs):
    h, _ = _mean_acc(desk_runs, "hybrid")
    q, _ = _mean_acc(desk_runs, "quantum_only")
    verdict("desk hybrid - quantum-only >= 0.10", h - q >= 0.10, f"{h:.4f} - {q:.4f} = {h - q:.4f}")


def test_desk_quantum_only_beats_baseline(desk_runs):
    q, each = _mean_acc(desk_runs, "quantum_only")
    verdict("desk quantum-only mean test accuracy > 0.63", q > 0.63, f"{q:.4f} (seeds: {each})")


def test_desk_lstm_accuracy(desk_runs):
    m, each = _mean_acc(desk_runs, "lstm")
    verdict("desk LSTM mean test accuracy > 0.75", m > 0.75, f"{m:.4f} (seeds: {each})")


def test_desk_runtime(desk_runs):
    worst = max(dt for _, _, dt in desk_runs.values())
    verdict("desk runtime per seed <= 30 min", worst <= 1800, f"slowest seed {worst:.0f}s")


# 6 ------------------------------------------------------------------------------

def test_invariants():
    rng = np.random.default_rng(5)
    clean = can_data.synthesize_dataset(T=9520, seed=3)
    stats = imaging.compute_norm_stats(clean.values[:6000])
    norm = imaging.normalize(clean, stats)
    in_range = bool(norm.min() >= 0 and norm.max() <= 1)

    labels = np.zeros(9520, dtype=bool)
    imgs = imaging.make_images(norm, labels)
    tiled = len(imgs) == 732 and np.array_equal(imgs.pixels.reshape(-1, 13), norm[:732 * 13])

    x = rng.random((200, 13, 13))
    resized = imaging.resize_4x4(x)
    mean_err = float(np.abs(resized.mean(axis=(1, 2)) - x.mean(axis=(1, 2))).max())

    ties = imaging.binarize(np.full((4, 4), 0.5)).sum() == 0 and \
        imaging.binarize(np.full((4, 4), np.nextafter(0.5, 1))).sum() == 16

    sched = attack.build_schedule(9520, 6000, 200, 100, seed=1)
    attacked, _ = attack.inject(clean, sched, seed=1)
    diff = attacked.values - clean.values
    constant = all(np.ptp(diff[iv.start:iv.stop, iv.feature_index]) < 1e-9 and
                   abs(diff[iv.start, iv.feature_index]) > 0 for iv in sched.intervals)
    outside = np.ones_like(diff, dtype=bool)
    for iv in sched.intervals:
        outside[iv.start:iv.stop, iv.feature_index] = False
    untouched = bool(np.all(diff[outside] == 0))

    c = qsim.random_circuit(6, 10_000, rng)
    norm_err = abs(qsim.run_circuit(c, rng.integers(0, 2, 6)).norm() - 1)

    ok = in_range and tiled and mean_err < 1e-12 and ties and constant and untouched and norm_err < 1e-10
    verdict("invariants", ok,
            f"range {in_range}, tiling {tiled}, resize mean err {mean_err:.1e}, tie rule {ties}, "
            f"shift constant {constant}, other cells untouched {untouched}, "
            f"norm err after 10k gates {norm_err:.1e}")


# 7 ------------------------------------------------------------------------------

def test_run_all_is_byte_identical(desk_runs, tmp_path):
    first, rep, _ = desk_runs[0]
    cfg = cfgmod.desk_config().with_seed(0).with_output(str(tmp_path))
    run_experiment(cfg)
    manifest_a = json.loads((first / "manifest.json").read_text())
    manifest_b = json.loads((tmp_path / "manifest.json").read_text())
    same_files = sorted(manifest_a) == sorted(manifest_b)
    mismatched = [k for k in manifest_a
                  if not (tmp_path / k).is_file() or not filecmp.cmp(first / k, tmp_path / k, shallow=False)]
    checkpoints = [k for k in manifest_a if k.startswith("models/")]
    ok = same_files and not mismatched and "report.json" in manifest_a and len(checkpoints) >= 6
    verdict("run-all twice gives identical bytes", ok,
            f"{len(manifest_a)} files compared ({len(checkpoints)} checkpoint files), mismatches: {mismatched or 'none'}")
