"""End-to-end experiment: data, attack, imaging, three detectors, report.

Every stage reads and writes files under one output directory so the CLI
subcommands can run stages separately. Wall-clock timings go to their own
file; everything else is a deterministic function of config and seeds.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import attack, can_data, imaging, nn, qnn
from ..can_data import FeatureMatrix
from ..imaging import CanImageSet
from ..nn.train import TrainConfig
from ..serialize import sha256_file, write_json
from .config import ConfigError, ExperimentConfig, check_capacity, to_dict
from .metrics import evaluate
from .report import write_report

STAGES = ("data", "attack", "imaging", "cnn", "hybrid", "quantum_only", "lstm", "report")


class StageError(RuntimeError):
    def __init__(self, stage: str, msg: str):
        super().__init__(f"[{stage}] {msg}")
        self.stage = stage


class _stage:
    """Context manager that re-raises any failure tagged with the stage name."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, kind, exc, tb):
        if exc is None or isinstance(exc, StageError):
            return False
        raise StageError(self.name, f"{type(exc).__name__}: {exc}") from exc


@dataclass(frozen=True)
class Workspace:
    root: Path

    def __post_init__(self):
        object.__setattr__(self, "root", Path(self.root))

    def path(self, *parts: str) -> Path:
        p = self.root.joinpath(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    clean = property(lambda self: self.path("data", "clean.csv"))
    injected = property(lambda self: self.path("data", "injected.csv"))
    schedule = property(lambda self: self.path("data", "schedule.json"))
    norm = property(lambda self: self.path("data", "norm_stats.json"))
    train_images = property(lambda self: self.path("images", "train.bin"))
    test_images = property(lambda self: self.path("images", "test.bin"))

    def model(self, name: str) -> Path:
        return self.path("models", name)

    def curve(self, name: str) -> Path:
        return self.path("curves", f"{name}.csv")

    def predictions(self, name: str) -> Path:
        return self.path("predictions", f"{name}_test.csv")


def require(path: Path, stage: str) -> Path:
    if not path.is_file():
        raise StageError(stage, f"missing input {path}; run the earlier stage first")
    return path


# --- stages ----------------------------------------------------------------

def stage_data(cfg: ExperimentConfig, ws: Workspace) -> FeatureMatrix:
    with _stage("data"):
        if cfg.data.source == "csv":
            clean = FeatureMatrix.from_csv(cfg.data.csv_path)
        else:
            clean = can_data.synthesize_dataset(T=cfg.data.T, seed=cfg.seeds.data)
        clean.to_csv(ws.clean)
        return clean


def stage_attack(cfg: ExperimentConfig, ws: Workspace, clean: FeatureMatrix | None = None):
    """Returns (attacked matrix, per-step labels, schedule with drawn shifts)."""
    with _stage("attack"):
        if clean is None:
            clean = FeatureMatrix.from_csv(require(ws.clean, "attack"))
        s = cfg.schedule
        try:
            check_capacity(clean.T, s)
        except ConfigError as exc:
            raise StageError("attack", str(exc)) from None
        sched = attack.build_schedule(clean.T, s.train_len, s.attack_len_train, s.attack_len_test,
                                      cfg.seeds.schedule)
        sched = attack.draw_shifts(sched, clean.column_ranges(), tuple(s.shift_fraction), cfg.seeds.shift)
        attacked, labels = attack.inject(clean, sched)
        attacked.to_csv(ws.injected, {"label": labels.astype(np.int64)})
        sched.save(ws.schedule)
        return attacked, labels, sched


def stage_imaging(cfg: ExperimentConfig, ws: Workspace, clean: FeatureMatrix | None = None,
                  attacked: FeatureMatrix | None = None, labels: np.ndarray | None = None):
    """Normalize with clean-train statistics, then cut train and test windows separately."""
    with _stage("imaging"):
        if clean is None:
            clean = FeatureMatrix.from_csv(require(ws.clean, "imaging"))
        if attacked is None:
            names, cols = can_data.read_table(require(ws.injected, "imaging"))
            attacked = FeatureMatrix(np.column_stack([cols[n] for n in names[:13]]), tuple(names[:13]))
            labels = cols["label"].astype(bool)
        split = cfg.schedule.train_len
        stats = imaging.compute_norm_stats(clean.rows(0, split))
        norm = imaging.normalize(attacked, stats)
        train = imaging.make_images(norm[:split], labels[:split])
        test = imaging.make_images(norm[split:], labels[split:], offset=split)
        write_json(ws.norm, stats.to_dict())
        imaging.save_images_binary(ws.train_images, train)
        imaging.save_images_binary(ws.test_images, test)
        return train, test


def load_images(ws: Workspace, stage: str) -> tuple[CanImageSet, CanImageSet]:
    return (imaging.load_images_binary(require(ws.train_images, stage)),
            imaging.load_images_binary(require(ws.test_images, stage)))


def training_set(cfg: ExperimentConfig, images: CanImageSet) -> tuple[np.ndarray, np.ndarray]:
    """Classical-network training data: mirrored copies (1 - x) appended if enabled.

    A mirrored window of a shifted feature looks like the opposite-sign
    attack, so this teaches the networks both directions of every attack.
    """
    x, y = images.pixels, images.labels
    if cfg.models.augment_mirror:
        return np.concatenate([x, 1.0 - x]), np.concatenate([y, y])
    return x, y


def _write_curve(path: Path, records: list[dict]) -> None:
    with open(path, "w") as fh:
        fh.write("epoch,loss,train_acc\n")
        for r in records:
            fh.write(f"{r['epoch']},{r['loss']!r},{r['train_acc']!r}\n")


def _write_predictions(path: Path, preds: np.ndarray, labels: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write("pred,label\n")
        for p, y in zip(preds, labels):
            fh.write(f"{int(p)},{int(y)}\n")


def _net_config(net, seed: int) -> TrainConfig:
    return TrainConfig(net.epochs, net.batch_size, net.learning_rate, seed)


def _qnn_config(net, seed: int) -> qnn.QnnConfig:
    return qnn.QnnConfig(net.epochs, net.batch_size, net.learning_rate, seed)


def stage_cnn(cfg: ExperimentConfig, ws: Workspace, train: CanImageSet | None = None) -> dict:
    with _stage("cnn"):
        if train is None:
            train, _ = load_images(ws, "cnn")
        x, y = training_set(cfg, train)
        tc = _net_config(cfg.models.cnn, cfg.seeds.model)
        params, hist = nn.cnn_train(x, y, tc)
        nn.save_params(ws.model("cnn"), params, {"arch": "cnn", "config": to_dict_net(tc)})
        _write_curve(ws.curve("cnn"), hist.records())
        return params


def to_dict_net(tc) -> dict:
    return {"epochs": tc.epochs, "batch_size": tc.batch_size, "learning_rate": tc.learning_rate, "seed": tc.seed}


def encode_bits(name: str, pixels: np.ndarray, cnn_params=None) -> np.ndarray:
    """16-bit inputs: CNN feature map (hybrid) or 4x4 average pool (quantum-only)."""
    fmap = nn.cnn_features(cnn_params, pixels) if name == "hybrid" else imaging.resize_4x4(pixels)
    return imaging.binarize(fmap)


def stage_qnn(cfg: ExperimentConfig, ws: Workspace, name: str, train: CanImageSet | None = None,
              test: CanImageSet | None = None, cnn_params: dict | None = None) -> dict:
    """Train the hybrid or quantum-only classifier; returns train/test metrics."""
    with _stage(name):
        if train is None or test is None:
            train, test = load_images(ws, name)
        if name == "hybrid" and cnn_params is None:
            cnn_params, _ = nn.load_params(require(ws.model("cnn").with_suffix(".bin"), name).with_suffix(""))
        bits_train = encode_bits(name, train.pixels, cnn_params)
        bits_test = encode_bits(name, test.pixels, cnn_params)
        settings = getattr(cfg.models, name)
        qc = _qnn_config(settings, cfg.seeds.model)
        model, hist = qnn.qnn_train(bits_train, train.labels, qnn.QnnModel.init(settings.layers, cfg.seeds.model), qc)
        model.save(ws.model(name), qc)
        _write_curve(ws.curve(name), hist.records())
        pred_train = qnn.classify(qnn.predict_batch(model, bits_train))
        pred_test = qnn.classify(qnn.predict_batch(model, bits_test))
        _write_predictions(ws.predictions(name), pred_test, test.labels)
        return _result(name, pred_train, train.labels, pred_test, test.labels, hist.records(),
                       {"n_qubits": model.n_qubits, "n_params": model.n_params, "layers": model.n_layers})


def stage_lstm(cfg: ExperimentConfig, ws: Workspace, train: CanImageSet | None = None,
               test: CanImageSet | None = None) -> dict:
    with _stage("lstm"):
        if train is None or test is None:
            train, test = load_images(ws, "lstm")
        x, y = training_set(cfg, train)
        s = cfg.models.lstm
        tc = _net_config(s, cfg.seeds.model)
        params, hist = nn.lstm_train(x, y, tc, hidden=s.hidden)
        nn.save_params(ws.model("lstm"), params, {"arch": "lstm", "hidden": s.hidden, "config": to_dict_net(tc)})
        _write_curve(ws.curve("lstm"), hist.records())
        pred_train = (nn.lstm_predict(params, train.pixels) > 0.5).astype(np.int64)
        pred_test = (nn.lstm_predict(params, test.pixels) > 0.5).astype(np.int64)
        _write_predictions(ws.predictions("lstm"), pred_test, test.labels)
        n_params = int(sum(v.size for v in params.values()))
        return _result("lstm", pred_train, train.labels, pred_test, test.labels, hist.records(),
                       {"n_params": n_params, "hidden": s.hidden})


def _result(name, pred_train, y_train, pred_test, y_test, curve, extra) -> dict:
    return {
        "model": name,
        "train": evaluate(pred_train, y_train).to_dict(),
        "test": evaluate(pred_test, y_test).to_dict(),
        "curve": curve,
        **extra,
    }


# --- orchestration -----------------------------------------------------------

def run_config(cfg: ExperimentConfig) -> dict:
    """Config as recorded in a run directory; the directory itself is left out
    so a run's files do not depend on where they were written."""
    d = to_dict(cfg)
    del d["output"]["dir"]
    return d


def run_experiment(cfg: ExperimentConfig, write_figures: bool | None = None) -> dict:
    """Run every selected model on one injected dataset and write the report.

    Returns the report dictionary (also written as ``report.json``).
    """
    try:
        cfg.validate()
    except ConfigError as exc:
        raise StageError("config", str(exc)) from None
    ws = Workspace(Path(cfg.output.dir))
    ws.root.mkdir(parents=True, exist_ok=True)
    write_json(ws.path("config.json"), run_config(cfg))
    timings = {}

    def timed(key, fn, *args, **kw):
        t0 = time.perf_counter()
        out = fn(*args, **kw)
        timings[key] = round(time.perf_counter() - t0, 3)
        return out

    clean = timed("data", stage_data, cfg, ws)
    attacked, labels, sched = timed("attack", stage_attack, cfg, ws, clean)
    train, test = timed("imaging", stage_imaging, cfg, ws, clean, attacked, labels)
    results = {}
    selected = cfg.models.selected
    if "hybrid" in selected:
        cnn_params = timed("cnn", stage_cnn, cfg, ws, train)
        results["hybrid"] = timed("hybrid", stage_qnn, cfg, ws, "hybrid", train, test, cnn_params)
    if "quantum_only" in selected:
        results["quantum_only"] = timed("quantum_only", stage_qnn, cfg, ws, "quantum_only", train, test)
    if "lstm" in selected:
        results["lstm"] = timed("lstm", stage_lstm, cfg, ws, train, test)

    with _stage("report"):
        rep = {
            "config": run_config(cfg),
            "dataset": {
                "T": clean.T,
                "split_point": cfg.schedule.train_len,
                "injected_sha256": sha256_file(ws.injected),
                "train_images": len(train),
                "test_images": len(test),
                "train_attack_images": int(train.labels.sum()),
                "test_attack_images": int(test.labels.sum()),
                "train_attack_steps": int(labels[: cfg.schedule.train_len].sum()),
                "test_attack_steps": int(labels[cfg.schedule.train_len:].sum()),
                "intervals": len(sched.intervals),
            },
            "models": results,
        }
        figures = cfg.output.figures if write_figures is None else write_figures
        write_report(ws.root, rep, figures=figures)
        write_json(ws.path("timings.json"), timings)
    return rep
