import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hqcan.harness import ConfigError, StageError, evaluate, run_experiment
from hqcan.harness import config as cfgmod
from hqcan.harness.config import ScheduleConfig


def smoke_config(out, **schedule):
    cfg = cfgmod.desk_config()
    cfg.data.T = 1300
    cfg.schedule = ScheduleConfig(**{"train_len": 800, "attack_len_train": 30, "attack_len_test": 20, **schedule})
    cfg.models.cnn.epochs = 3
    cfg.models.hybrid.epochs = 1
    cfg.models.quantum_only.epochs = 1
    cfg.models.lstm.epochs = 2
    cfg.output.dir = str(out)
    return cfg


# --- metrics ------------------------------------------------------------------

def table_split_labels():
    return np.array([1] * 13000 + [0] * 22200)


def test_perfect_predictor_on_table_split():
    y = table_split_labels()
    m = evaluate(y, y)
    assert (m.tp, m.tn, m.fp, m.fn, m.accuracy) == (13000, 22200, 0, 0, 1.0)


def test_all_zero_predictor_gives_prevalence_complement():
    y = table_split_labels()
    m = evaluate(np.zeros_like(y), y)
    assert m.accuracy == pytest.approx(22200 / 35200)
    assert round(m.accuracy, 4) == 0.6307
    assert m.precision == 0.0 and m.recall == 0.0 and m.f1 == 0.0


def test_inverted_predictor_scores_zero():
    y = table_split_labels()
    assert evaluate(1 - y, y).accuracy == 0.0


def test_metric_errors():
    with pytest.raises(ValueError):
        evaluate([1, 0], [1])
    with pytest.raises(ValueError):
        evaluate([], [])
    with pytest.raises(ValueError):
        evaluate([2], [1])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=200), st.randoms())
def test_metrics_properties(pairs, rnd):
    p = np.array([a for a, _ in pairs])
    y = np.array([b for _, b in pairs])
    m = evaluate(p, y)
    assert m.tp + m.tn + m.fp + m.fn == len(p)
    assert m.accuracy + evaluate(1 - p, y).accuracy == pytest.approx(1.0)
    perm = list(range(len(p)))
    rnd.shuffle(perm)
    assert evaluate(p[perm], y[perm]) == m


# --- config -------------------------------------------------------------------

def test_config_round_trip(tmp_path):
    cfg = cfgmod.paper_config()
    cfgmod.save_config(cfg, tmp_path / "c.json")
    back = cfgmod.load_config(tmp_path / "c.json")
    assert cfgmod.to_dict(back) == cfgmod.to_dict(cfg)
    assert back.data.T == 95_200 and back.schedule.attack_len_train == 2000


def test_config_defaults():
    cfg = cfgmod.desk_config()
    assert (cfg.data.T, cfg.schedule.train_len, cfg.schedule.attack_len_train, cfg.schedule.attack_len_test) == \
        (9520, 6000, 200, 100)
    assert (cfg.models.hybrid.layers, cfg.models.hybrid.epochs, cfg.models.hybrid.batch_size) == (6, 20, 1)
    assert (cfg.models.quantum_only.layers, cfg.models.quantum_only.epochs,
            cfg.models.quantum_only.batch_size) == (8, 50, 8)
    assert cfg.models.lstm.epochs == 100


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        cfgmod.load_config(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ConfigError):
        cfgmod.load_config(tmp_path / "bad.json")
    (tmp_path / "extra.json").write_text(json.dumps({"data": {"T": 100, "colour": 1}}))
    with pytest.raises(ConfigError, match="colour"):
        cfgmod.load_config(tmp_path / "extra.json")
    (tmp_path / "model.json").write_text(json.dumps({"models": {"selected": ["svm"]}}))
    with pytest.raises(ConfigError):
        cfgmod.load_config(tmp_path / "model.json")
    (tmp_path / "csv.json").write_text(json.dumps({"data": {"source": "csv", "csv_path": "nope.csv"}}))
    with pytest.raises(ConfigError):
        cfgmod.load_config(tmp_path / "csv.json")


def test_partial_model_section_keeps_other_defaults(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"models": {"hybrid": {"epochs": 3}}}))
    cfg = cfgmod.load_config(tmp_path / "c.json")
    assert cfg.models.hybrid.epochs == 3 and cfg.models.hybrid.layers == 6


# --- pipeline -----------------------------------------------------------------

def test_schedule_overflow_is_tagged_attack(tmp_path):
    cfg = smoke_config(tmp_path, attack_len_train=70)  # 13 * 70 > 800
    with pytest.raises(StageError) as exc:
        run_experiment(cfg)
    assert exc.value.stage == "attack"


@pytest.fixture(scope="module")
def smoke_report(tmp_path_factory):
    out = tmp_path_factory.mktemp("smoke")
    return out, run_experiment(smoke_config(out))


def test_report_fields(smoke_report):
    out, rep = smoke_report
    assert set(rep["models"]) == {"hybrid", "quantum_only", "lstm"}
    for r in rep["models"].values():
        assert set(r["test"]) >= {"tp", "tn", "fp", "fn", "accuracy"}
        assert r["test"]["tp"] + r["test"]["tn"] + r["test"]["fp"] + r["test"]["fn"] == rep["dataset"]["test_images"]
        assert len(r["curve"]) >= 1
    assert rep["models"]["hybrid"]["n_params"] == 96
    assert rep["models"]["quantum_only"]["n_params"] == 128
    assert rep["dataset"]["train_attack_steps"] == 13 * 30
    assert rep["dataset"]["train_images"] == 800 // 13 and rep["dataset"]["test_images"] == 500 // 13
    for name in ("report.json", "summary.txt", "manifest.json", "timings.json",
                 "figures/accuracy.png", "figures/curves.png", "data/injected.csv", "models/cnn.bin"):
        assert (out / name).is_file(), name


def test_all_models_share_one_dataset(smoke_report):
    out, rep = smoke_report
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["data/injected.csv"] == rep["dataset"]["injected_sha256"]
    labels = [np.loadtxt(out / "predictions" / f"{m}_test.csv", delimiter=",", skiprows=1)[:, 1]
              for m in ("hybrid", "quantum_only", "lstm")]
    assert all(np.array_equal(labels[0], other) for other in labels[1:])


def test_summary_lists_three_models(smoke_report):
    out, _ = smoke_report
    text = (out / "summary.txt").read_text()
    for label in ("Hybrid QNN", "Quantum-only", "LSTM"):
        assert label in text


def test_manifest_excludes_timings(smoke_report):
    out, _ = smoke_report
    manifest = json.loads((out / "manifest.json").read_text())
    assert "timings.json" not in manifest and "report.json" in manifest
    assert "time" not in (out / "report.json").read_text().lower()
