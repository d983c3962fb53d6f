"""Command-line entry point: ``hqcan <subcommand> [--config C] [--seed N] [--out DIR]``."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .. import can_data
from . import pipeline, report
from .config import ConfigError, ExperimentConfig, desk_config, load_config
from .metrics import evaluate
from .pipeline import StageError, Workspace

SUBCOMMANDS = ("synth", "inject", "images", "train-cnn", "train-qnn", "train-lstm", "eval", "run-all", "report")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="experiment config JSON (default: desk-scale settings)")
    p.add_argument("--seed", type=int, help="override every seed in the config")
    p.add_argument("--out", help="output directory (overrides output.dir)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hqcan", description="CAN attack detection experiments")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("synth", help="write the attack-free feature matrix")
    _common(p)
    p.add_argument("--write-log", action="store_true",
                   help="also write the matrix as a CAN log plus its signal spec file")
    p.add_argument("--decode-log", metavar="LOG", help="decode this CAN log instead of synthesizing")
    p.add_argument("--specs", metavar="SPECS", help="signal spec file for --decode-log")

    for name, text in (("inject", "inject attacks and write labels"),
                       ("images", "build normalized 13x13 train/test images"),
                       ("train-cnn", "train the CNN feature extractor"),
                       ("train-lstm", "train the LSTM baseline"),
                       ("run-all", "run every stage and write the report")):
        _common(sub.add_parser(name, help=text))

    p = sub.add_parser("train-qnn", help="train the hybrid or quantum-only classifier")
    _common(p)
    p.add_argument("--model", choices=("hybrid", "quantum_only"), default="hybrid")

    p = sub.add_parser("eval", help="metrics JSON for a prediction file against labels")
    p.add_argument("--pred", required=True, help="CSV with a 'pred' column (or one column)")
    p.add_argument("--labels", required=True, help="CSV with a 'label' column (or one column)")

    p = sub.add_parser("report", help="re-render summary, figures and manifest from report.json")
    _common(p)
    return parser


def _config(args, parser) -> ExperimentConfig:
    try:
        cfg = load_config(args.config) if args.config else desk_config()
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be non-negative")
            cfg = cfg.with_seed(args.seed)
        if args.out:
            cfg = cfg.with_output(args.out)
    except ConfigError as exc:
        parser.error(str(exc))
    return cfg


def read_column(path, preferred: str) -> np.ndarray:
    """0/1 values from a CSV: the named column if a header has it, else the last column."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ValueError(f"{path} is empty")
    col = -1
    try:
        float(rows[0][-1])
    except ValueError:
        header = [h.strip() for h in rows[0]]
        col = header.index(preferred) if preferred in header else -1
        rows = rows[1:]
    try:
        return np.array([int(float(r[col])) for r in rows], dtype=np.int64)
    except (ValueError, IndexError) as exc:
        raise ValueError(f"{path}: {exc}") from None


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def cmd_synth(cfg, args, ws):
    with pipeline._stage("data"):
        if args.decode_log:
            if not args.specs:
                raise ValueError("--decode-log needs --specs")
            frames = can_data.parse_can_log(Path(args.decode_log).read_text())
            specs = can_data.parse_signal_specs(Path(args.specs).read_text())
            clean = can_data.decode_log(frames, specs)
            clean.to_csv(ws.clean)
        else:
            clean = pipeline.stage_data(cfg, ws)
        if args.write_log:
            specs = can_data.default_signal_specs()
            ws.path("data", "can_log.csv").write_text(can_data.format_can_log(can_data.encode_log(clean, specs)))
            ws.path("data", "signals.csv").write_text(
                "name,start_bit,bit_length,byte_order,scale,offset,min,max,can_id\n"
                + can_data.format_signal_specs(specs))
    print(f"wrote {ws.clean} ({clean.T} rows)")


def cmd_inject(cfg, args, ws):
    _, labels, sched = pipeline.stage_attack(cfg, ws)
    split = cfg.schedule.train_len
    print(f"wrote {ws.injected}: {int(labels[:split].sum())} train / {int(labels[split:].sum())} test attack steps, "
          f"{len(sched.intervals)} intervals")


def cmd_images(cfg, args, ws):
    train, test = pipeline.stage_imaging(cfg, ws)
    print(f"wrote {len(train)} train and {len(test)} test images under {ws.root / 'images'}")


def cmd_train_cnn(cfg, args, ws):
    pipeline.stage_cnn(cfg, ws)
    print(f"wrote {ws.model('cnn')}.bin")


def _brief(res: dict) -> dict:
    return {k: v for k, v in res.items() if k != "curve"}


def cmd_train_qnn(cfg, args, ws):
    _print_json(_brief(pipeline.stage_qnn(cfg, ws, args.model)))


def cmd_train_lstm(cfg, args, ws):
    _print_json(_brief(pipeline.stage_lstm(cfg, ws)))


def cmd_run_all(cfg, args, ws):
    rep = pipeline.run_experiment(cfg)
    print(report.summary_text(rep), end="")


def cmd_report(cfg, args, ws):
    with pipeline._stage("report"):
        print(report.render(ws.root, figures=cfg.output.figures), end="")


def cmd_eval(args):
    with pipeline._stage("eval"):
        pred = read_column(args.pred, "pred")
        labels = read_column(args.labels, "label")
        _print_json(evaluate(pred, labels).to_dict())


HANDLERS = {
    "synth": cmd_synth, "inject": cmd_inject, "images": cmd_images, "train-cnn": cmd_train_cnn,
    "train-qnn": cmd_train_qnn, "train-lstm": cmd_train_lstm, "run-all": cmd_run_all, "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        if args.command == "eval":
            cmd_eval(args)
            return 0
        try:
            cfg = _config(args, parser)
        except SystemExit as exc:
            return int(exc.code or 0)
        HANDLERS[args.command](cfg, args, Workspace(Path(cfg.output.dir)))
    except StageError as exc:
        print(f"hqcan: error [{exc.stage}]: {str(exc).split('] ', 1)[-1]}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
