"""Command-line pipeline: synth | train | eval | classify | assess | report.

Exit codes: 0 success, 1 usage error, 2 data/configuration error.
Option precedence: command-line flag > config file > built-in default.
Config files are UTF-8 ``key=value`` lines (``#`` comments) whose keys
are field names of the model or training configuration; unknown keys
are rejected.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import __version__
from .classifier import (
    ModelConfig,
    TrainConfig,
    TrainLog,
    build_model,
    evaluate,
    predict,
    train,
)
from .dataset import (
    SplitConfig,
    extract_epochs,
    is_key_movement,
    load_dataset_dir,
    parse_recording,
    split_train_test,
)
from .errors import ConfigError, KinemotionError
from .kinematics import window as window_series
from .nn import load_checkpoint, save_checkpoint
from .smoothness import (
    SessionTable,
    aggregate_by_movement,
    cohort_compare,
    compare_cohort_table,
    evolution_from_table,
    load_table,
    record_for_segment,
    render_report,
    session_evolution,
)
from .synth import gen_dataset

USAGE_ERROR, DATA_ERROR = 1, 2

_MODEL_FIELDS = {f.name: f for f in dataclasses.fields(ModelConfig)}
_TRAIN_FIELDS = {f.name: f for f in dataclasses.fields(TrainConfig)}


class _Parser(argparse.ArgumentParser):
    """argparse that exits with the documented usage-error code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(USAGE_ERROR)


def _parse_config_value(name, field, raw):
    kind = field.type
    try:
        if "tuple" in kind:
            parts = [p for p in raw.replace(",", " ").split() if p]
            caster = float if "float" in kind else int
            return tuple(caster(p) for p in parts)
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {name!r}: {raw!r}") from None
    return raw


def load_config_file(path):
    """Split a key=value file into model and training overrides."""
    model_kw, train_kw = {}, {}
    for line_no, raw in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in _MODEL_FIELDS:
            model_kw[key] = _parse_config_value(key, _MODEL_FIELDS[key], value)
        elif key in _TRAIN_FIELDS:
            train_kw[key] = _parse_config_value(key, _TRAIN_FIELDS[key], value)
        else:
            raise ConfigError(f"{path}:{line_no}: unknown configuration key {key!r}")
    return model_kw, train_kw


def _resolve_configs(args):
    model_kw, train_kw = {}, {}
    if getattr(args, "config", None):
        model_kw, train_kw = load_config_file(args.config)
    for name, value in (
        ("epochs", args.epochs),
        ("batch_size", args.batch_size),
        ("lr", args.lr),
        ("augment_max_frac", args.augment_max_frac),
        ("seed", args.seed),
    ):
        if value is not None:
            train_kw[name] = value
    if args.window is not None:
        model_kw["input_len"] = args.window
    return ModelConfig(**model_kw), TrainConfig(**train_kw)


def _load_epochs(data_dir, input_len):
    epochs = []
    for rec in load_dataset_dir(data_dir):
        epochs.extend(extract_epochs(rec, input_len).epochs)
    if not epochs:
        raise ConfigError(f"no labelled segments found under {data_dir}")
    return epochs


def _split(epochs, args):
    cfg = SplitConfig(train_fraction=args.train_fraction, seed=args.split_seed)
    return split_train_test(epochs, cfg)


def _write_report(obj, out_dir, stem):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{stem}.csv"
    json_path = out_dir / f"{stem}.json"
    csv_path.write_text(render_report(obj, "csv"), encoding="utf-8")
    json_path.write_text(render_report(obj, "json"), encoding="utf-8")
    print(f"wrote {csv_path} and {json_path}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_synth(args):
    recs = gen_dataset(
        n_per_class=args.n_per_class,
        healthy_fraction=args.healthy_fraction,
        seed=args.seed,
        out_dir=args.out,
    )
    segments = sum(len(r.annotations) for r in recs)
    print(f"wrote {len(recs)} recordings ({segments} labelled segments) to {args.out}")
    return 0


def _cmd_train(args):
    model_cfg, train_cfg = _resolve_configs(args)
    epochs = _load_epochs(args.data, model_cfg.input_len)
    train_set, test_set = _split(epochs, args)
    net = build_model(model_cfg, seed=train_cfg.seed)
    log = train(net, train_set, test_set, train_cfg)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(
        out / "model.knm",
        net,
        seed=train_cfg.seed,
        extra={"input_len": model_cfg.input_len},
    )
    (out / "train_log.csv").write_text(log.to_csv(), encoding="utf-8")
    (out / "confusion.csv").write_text(log.confusion_to_csv(), encoding="utf-8")
    print(
        f"trained {train_cfg.epochs} training epochs on {len(train_set)} epochs; "
        f"final test accuracy {log.test_acc[-1]:.4f}"
    )
    print(f"checkpoint: {out / 'model.knm'}")
    return 0


def _checkpoint_window(ckpt):
    try:
        window = int(ckpt.extra["input_len"])
    except KeyError:
        raise ConfigError(
            "checkpoint does not record its input window length"
        ) from None
    ckpt.net.input_len = window
    return window


def _cmd_eval(args):
    ckpt = load_checkpoint(args.checkpoint)
    epochs = _load_epochs(args.data, _checkpoint_window(ckpt))
    _, test_set = _split(epochs, args)
    result = evaluate(ckpt.net, test_set)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log = TrainLog(confusion=result.confusion)
    (out / "confusion.csv").write_text(log.confusion_to_csv(), encoding="utf-8")
    print(f"test accuracy {result.accuracy:.4f} on {len(test_set)} epochs")
    return 0


def _cmd_classify(args):
    ckpt = load_checkpoint(args.checkpoint)
    input_len = _checkpoint_window(ckpt)
    rec = parse_recording(args.recording)

    rows = []
    if args.mode == "segments":
        result = extract_epochs(rec, input_len)
        # mirror extract_epochs' selection so annotations align with epochs
        key_anns = [
            a
            for a in rec.annotations
            if is_key_movement(a.label) and a.end - a.start >= 2
        ]
        for ann, labelled in zip(key_anns, result.epochs):
            probs, label = predict(ckpt.net, labelled.epoch)
            rows.append((ann.start, ann.end, ann.label, label, probs))
    else:
        for ep in window_series(rec.series, input_len, args.stride):
            probs, label = predict(ckpt.net, ep)
            rows.append((ep.offset, ep.offset + input_len, "", label, probs))

    lines = ["start_index,end_index,true_label,predicted,p_M1,p_M2,p_M3,p_M4"]
    for start, end, truth, label, probs in rows:
        lines.append(
            f"{start},{end},{truth},{label}," + ",".join(f"{p:.6g}" for p in probs)
        )
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"classified {len(rows)} epochs -> {args.out}")
    else:
        print(text, end="")
    return 0


def _cmd_assess(args):
    if bool(args.fixtures) == bool(args.data):
        raise ConfigError("give exactly one of --fixtures or --data")

    if args.fixtures:
        table = load_table(args.fixtures)
        if isinstance(table, SessionTable):
            flags = evolution_from_table(table, axis=args.axis)
            stem = f"improvement_{args.patient}" if args.patient else "improvement"
            _write_report(flags, args.out, stem)
            for movement in sorted(flags.movements):
                sessions = sorted(flags.improved(movement))
                print(f"{movement}: improved sessions {sessions or '{}'}")
        else:
            _write_report(compare_cohort_table(table, axis=args.axis), args.out,
                          "cohort_comparison")
        return 0

    recordings = load_dataset_dir(args.data)
    records = [
        record_for_segment(rec, ann)
        for rec in recordings
        for ann in rec.annotations
        if is_key_movement(ann.label)
    ]
    if not records:
        raise ConfigError(f"no labelled segments under {args.data}")

    measures = {
        "jerk": lambda r: r.jerk_stats,
        "squared_jerk": lambda r: r.squared_jerk_stats,
    }
    for measure, pick in measures.items():
        by_cohort = {"healthy": [], "patient": []}
        for r in records:
            by_cohort[r.group].append((r.movement, pick(r)))
        if by_cohort["healthy"] and by_cohort["patient"]:
            comparison = cohort_compare(
                aggregate_by_movement(by_cohort["healthy"]),
                aggregate_by_movement(by_cohort["patient"]),
                axis=args.axis,
            )
            _write_report(comparison, args.out, f"cohort_comparison_{measure}")

    patients = sorted({r.subject_id for r in records if r.group == "patient"})
    for subject in patients:
        own = [r for r in records if r.subject_id == subject]
        if not any(r.session == 1 for r in own):
            continue
        flags = session_evolution(own, axis=args.axis)
        _write_report(flags, args.out, f"improvement_{subject}")
    return 0


def _cmd_report(args):
    table = load_table(args.fixtures)
    _write_report(table, args.out, Path(args.fixtures).stem)
    return 0


# ---------------------------------------------------------------------------
# parser assembly
# ---------------------------------------------------------------------------


def _add_split_flags(sub):
    sub.add_argument("--train-fraction", type=float, default=0.8,
                     help="fraction of epochs used for training (default 0.8)")
    sub.add_argument("--split-seed", type=int, default=0,
                     help="seed of the deterministic train/test split")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="kinemotion",
        description="Movement classification and jerk-based smoothness assessment.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("synth", help="generate a labelled synthetic dataset")
    p.add_argument("--n-per-class", type=int, required=True,
                   help="segments to generate per movement class")
    p.add_argument("--healthy-fraction", type=float, default=0.5,
                   help="fraction of recordings from healthy-style profiles")
    p.add_argument("--seed", type=int, default=0, help="generator seed")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_synth)

    p = subs.add_parser("train", help="train the classifier on a dataset directory")
    p.add_argument("--data", required=True, help="directory of recordings")
    p.add_argument("--out", required=True, help="output directory for checkpoint/logs")
    p.add_argument("--config", help="key=value overrides file")
    p.add_argument("--epochs", type=int, help="number of training epochs")
    p.add_argument("--batch-size", type=int, help="mini-batch size")
    p.add_argument("--lr", type=float, help="Adam learning rate")
    p.add_argument("--augment-max-frac", type=float,
                   help="max circular time shift as a fraction of the window")
    p.add_argument("--seed", type=int, help="training/init seed")
    p.add_argument("--window", type=int, help="classifier input window length")
    _add_split_flags(p)
    p.set_defaults(func=_cmd_train)

    p = subs.add_parser("eval", help="evaluate a checkpoint on the test split")
    p.add_argument("--data", required=True, help="directory of recordings")
    p.add_argument("--checkpoint", required=True, help="model checkpoint file")
    p.add_argument("--out", required=True,
                   help="output directory for the confusion matrix")
    _add_split_flags(p)
    p.set_defaults(func=_cmd_eval)

    p = subs.add_parser("classify", help="label the epochs of one recording")
    p.add_argument("--recording", required=True, help="signal CSV of the recording")
    p.add_argument("--checkpoint", required=True, help="model checkpoint file")
    p.add_argument("--mode", choices=("segments", "windows"), default="segments",
                   help="classify annotated segments or sliding windows")
    p.add_argument("--stride", type=int, default=64, help="stride for --mode windows")
    p.add_argument("--out", help="output CSV (stdout when omitted)")
    p.set_defaults(func=_cmd_classify)

    p = subs.add_parser("assess", help="smoothness statistics and improvement flags")
    p.add_argument("--fixtures", help="reference table CSV to assess")
    p.add_argument("--data", help="directory of recordings to assess")
    p.add_argument("--patient", help="patient id used to name fixture output")
    p.add_argument("--axis", choices=("x", "y", "z"), default="x",
                   help="axis reported (default x)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_assess)

    p = subs.add_parser("report", help="render a reference table as CSV and JSON")
    p.add_argument("--fixtures", required=True, help="reference table CSV")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_report)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR
    except KinemotionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR


def main() -> None:
    sys.exit(run())
