"""Report files: JSON, a plain-text summary, figures and a checksum manifest."""
from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from ..serialize import sha256_file, write_json  # noqa: E402

LABELS = {"hybrid": "Hybrid QNN", "quantum_only": "Quantum-only", "lstm": "LSTM"}
ORDER = ("hybrid", "quantum_only", "lstm")
# excluded from the manifest: wall-clock numbers and the manifest itself
_UNTRACKED = {"timings.json", "manifest.json"}


def summary_text(rep: dict) -> str:
    """Accuracy table plus a bar per model, one row per detector."""
    models = [m for m in ORDER if m in rep["models"]]
    lines = [
        f"dataset: T={rep['dataset']['T']} split={rep['dataset']['split_point']} "
        f"train_images={rep['dataset']['train_images']} test_images={rep['dataset']['test_images']}",
        f"injected sha256: {rep['dataset']['injected_sha256']}",
        "",
        f"{'model':<14}{'train_acc':>10}{'test_acc':>10}{'tp':>6}{'tn':>6}{'fp':>6}{'fn':>6}  test accuracy",
        "-" * 84,
    ]
    for m in models:
        r = rep["models"][m]
        te = r["test"]
        bar = "#" * int(round(40 * te["accuracy"]))
        lines.append(f"{LABELS[m]:<14}{r['train']['accuracy']:>10.4f}{te['accuracy']:>10.4f}"
                     f"{te['tp']:>6}{te['tn']:>6}{te['fp']:>6}{te['fn']:>6}  {bar}")
    return "\n".join(lines) + "\n"


def _save(fig, path: Path) -> None:
    # no Software/date metadata, so reruns give identical bytes
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)


def plot_accuracy(rep: dict, path: Path) -> None:
    models = [m for m in ORDER if m in rep["models"]]
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = range(len(models))
    width = 0.38
    train = [rep["models"][m]["train"]["accuracy"] for m in models]
    test = [rep["models"][m]["test"]["accuracy"] for m in models]
    ax.bar([x - width / 2 for x in xs], train, width, label="train", color="#4c72b0")
    ax.bar([x + width / 2 for x in xs], test, width, label="test", color="#dd8452")
    for x, (a, b) in zip(xs, zip(train, test)):
        ax.text(x - width / 2, a + 0.01, f"{100 * a:.1f}", ha="center", fontsize=8)
        ax.text(x + width / 2, b + 0.01, f"{100 * b:.1f}", ha="center", fontsize=8)
    ax.set_xticks(list(xs), [LABELS[m] for m in models])
    ax.set_ylim(0, 1.08)
    ax.set_ylabel("accuracy")
    ax.set_title("Attack detection accuracy")
    ax.legend(loc="lower right")
    fig.tight_layout()
    _save(fig, path)


def plot_curves(rep: dict, curves: dict[str, list[dict]], path: Path) -> None:
    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(10, 4))
    for name, recs in curves.items():
        if not recs:
            continue
        ep = [r["epoch"] for r in recs]
        label = LABELS.get(name, name.upper())
        ax_loss.plot(ep, [r["loss"] for r in recs], label=label)
        ax_acc.plot(ep, [r["train_acc"] for r in recs], label=label)
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("training loss")
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("training accuracy")
    ax_acc.legend(loc="lower right")
    fig.tight_layout()
    _save(fig, path)


def read_curve(path: Path) -> list[dict]:
    if not path.is_file():
        return []
    rows = path.read_text().splitlines()[1:]
    out = []
    for row in rows:
        e, l, a = row.split(",")
        out.append({"epoch": int(e), "loss": float(l), "train_acc": float(a)})
    return out


def write_manifest(root: Path) -> dict:
    files = sorted(p for p in root.rglob("*") if p.is_file() and p.name not in _UNTRACKED)
    manifest = {str(p.relative_to(root)): sha256_file(p) for p in files}
    write_json(root / "manifest.json", manifest)
    return manifest


def write_report(root, rep: dict, figures: bool = True) -> None:
    root = Path(root)
    write_json(root / "report.json", rep)
    (root / "summary.txt").write_text(summary_text(rep))
    if figures:
        fig_dir = root / "figures"
        fig_dir.mkdir(exist_ok=True)
        plot_accuracy(rep, fig_dir / "accuracy.png")
        curves = {name: read_curve(root / "curves" / f"{name}.csv") for name in ("cnn",) + ORDER}
        plot_curves(rep, curves, fig_dir / "curves.png")
    write_manifest(root)


def render(out_dir, figures: bool = True) -> str:
    """Rebuild summary, figures and manifest from an existing report.json."""
    root = Path(out_dir)
    path = root / "report.json"
    if not path.is_file():
        raise FileNotFoundError(f"{path} not found; run run-all first")
    rep = json.loads(path.read_text())

    write_report(root, rep, figures)
    return summary_text(rep)
