"""Batch command-line front end.

Exit codes: 0 success, 1 a check failed, 2 usage error (bad arguments,
missing files, malformed configs or data).
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import verify as verify_mod
from .data import DatasetFormatError, generate, load_dataset, save_dataset
from .experiments import PLANS, run_cell
from .io import (ConfigError, FormatError, config_to_dict, configs_from_dict, data_spec_from_dict,
                 load_checkpoint, parse_config_text, save_checkpoint)
from .losses import cross_entropy, sm_term, smfl
from .model import ModelConfig
from .report import ReportFormatError, RunReport, load_report
from .train import TrainConfig, evaluate, margin_statistics, train

log = logging.getLogger("slnl")

EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _global_flags(defaults: bool) -> argparse.ArgumentParser:
    # Shared by the top-level parser and every subcommand so the flags may be
    # given on either side of the command name. Subparsers must not reset a
    # value given before the command, hence SUPPRESS there.
    keep = None if defaults else argparse.SUPPRESS
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=keep, help="override every seed in the config")
    p.add_argument("--config", type=Path, default=keep, help="key = value config file")
    p.add_argument("--out", type=Path, default=keep, help="output file or directory")
    p.add_argument("-v", "--verbose", action="store_true", default=False if defaults else argparse.SUPPRESS)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slnl", parents=[_global_flags(True)],
                                     description="Skeleton action recognition toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = [_global_flags(False)]

    p = sub.add_parser("verify", parents=common, help="run oracle and property checks")
    p.add_argument("suite", choices=[*verify_mod.SUITES, "all"])

    p = sub.add_parser("gendata", parents=common, help="write synthetic train/test sets")
    p.add_argument("spec", nargs="?", type=Path, help="data.* key = value file (defaults if omitted)")

    p = sub.add_parser("train", parents=common, help="train a model and save a checkpoint")
    p.add_argument("data", type=Path, help="directory with train.skds [and test.skds], or one .skds file")

    p = sub.add_parser("eval", parents=common, help="score a checkpoint on a dataset")
    p.add_argument("checkpoint", type=Path)
    p.add_argument("data", type=Path, help="a .skds file or a directory holding test.skds")

    p = sub.add_parser("ablate", parents=common, help="train every cell of an ablation plan")
    p.add_argument("plan", choices=sorted(PLANS))
    p.add_argument("data", type=Path, help="directory with train.skds and test.skds")

    p = sub.add_parser("plot", parents=common, help="write plot-ready TSV series")
    p.add_argument("report", type=Path, nargs="?", help="report to extract curves and bars from")
    return parser


# --- helpers -------------------------------------------------------------------


def _configs(args) -> tuple[ModelConfig, TrainConfig, dict[str, str]]:
    values = parse_config_text(args.config.read_text(encoding="utf-8")) if args.config else {}
    model_cfg, train_cfg = configs_from_dict(values, args.seed)
    return model_cfg, train_cfg, values


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise UsageError(f"{what} not found: {path}")
    return path


def _splits(path: Path):
    _require(path, "data")
    if path.is_dir():
        train_set = load_dataset(_require(path / "train.skds", "training set"))
        test_path = path / "test.skds"
        return train_set, load_dataset(test_path) if test_path.exists() else None
    return load_dataset(path), None


def _eval_set(path: Path):
    _require(path, "data")
    return load_dataset(_require(path / "test.skds", "test set") if path.is_dir() else path)


def _check_fit(cfg: ModelConfig, samples, what: str) -> None:
    if not samples:
        raise UsageError(f"{what} is empty")
    d, _, n = samples[0].shape
    if (d, n) != (cfg.d, cfg.n_joints):
        raise UsageError(f"{what} has d={d}, N={n} but the model expects d={cfg.d}, N={cfg.n_joints}")
    if max(s.label for s in samples) >= cfg.n_classes:
        raise UsageError(f"{what} has labels beyond model.n_classes={cfg.n_classes}")


def _finish(report: RunReport, path: Path | None, start: float) -> None:
    report.wall_time = time.perf_counter() - start
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        report.save(path)
        print(f"report written to {path}")


# --- commands ------------------------------------------------------------------


def cmd_verify(args) -> int:
    start = time.perf_counter()
    report = RunReport("verify", args.seed or 0, config={"suite": args.suite})
    table = report.table("checks", ["check", "tolerance", "observed", "status"])
    suites = list(verify_mod.SUITES) if args.suite == "all" else [args.suite]
    for name in suites:
        for check in verify_mod.SUITES[name]():
            print(check.line(), flush=True)
            report.checks[check.name] = check.passed
            table.add(check.name, check.tolerance, check.observed, "pass" if check.passed else "fail")
    failed = [k for k, ok in report.checks.items() if not ok]
    print(f"{len(report.checks) - len(failed)}/{len(report.checks)} checks passed")
    for name in failed:
        print(f"failed check: {name}")
    _finish(report, args.out, start)
    return EXIT_CHECK if failed else EXIT_OK


def cmd_gendata(args) -> int:
    values = parse_config_text(_require(args.spec, "spec").read_text(encoding="utf-8")) if args.spec else {}
    spec, test_n = data_spec_from_dict(values, args.seed)
    out = args.out or Path("data")
    out.mkdir(parents=True, exist_ok=True)
    train_set = generate(spec, stream=0)
    test_set = generate(replace(spec, samples_per_class=test_n), stream=1)
    save_dataset(out / "train.skds", train_set)
    save_dataset(out / "test.skds", test_set)
    print(f"wrote {len(train_set)} training and {len(test_set)} test sequences "
          f"({len(spec.classes)} classes, seed {spec.seed}) to {out}")
    return EXIT_OK


def _epoch_table(report: RunReport, history) -> None:
    t = report.table("epochs", ["epoch", "lr", "train_loss", "train_accuracy", "val_loss", "val_accuracy"])
    for m in history:
        t.add(m.epoch, m.lr, m.train_loss, m.train_accuracy, m.val_loss, m.val_accuracy)


def cmd_train(args) -> int:
    start = time.perf_counter()
    model_cfg, train_cfg, _ = _configs(args)
    train_set, test_set = _splits(args.data)
    _check_fit(model_cfg, train_set, "training set")
    if test_set is not None:
        _check_fit(model_cfg, test_set, "test set")
    out = args.out or Path("model.slck")

    def progress(m):
        print(f"epoch {m.epoch:3d}  lr {m.lr:.2e}  loss {m.train_loss:.4f}  acc {m.train_accuracy:.3f}"
              f"  val_acc {m.val_accuracy:.3f}", flush=True)

    result = train(train_set, model_cfg, train_cfg, val_set=test_set, callback=progress)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out, result.params, model_cfg, train_cfg)
    print(f"checkpoint written to {out}")

    report = RunReport("train", train_cfg.seed, config=config_to_dict(model_cfg, train_cfg))
    _epoch_table(report, result.history)
    last = result.history[-1]
    report.metrics.update(train_loss=last.train_loss, train_accuracy=last.train_accuracy)
    if test_set is not None:
        report.metrics["test_accuracy"] = last.val_accuracy
        report.metrics["test_margin_fraction"] = margin_statistics(
            result.params, model_cfg, test_set, model_cfg.loss.margin or 0.4).fraction
    _finish(report, out.with_name(out.name + ".report"), start)
    return EXIT_OK


def cmd_eval(args) -> int:
    start = time.perf_counter()
    params, model_cfg, train_cfg = load_checkpoint(_require(args.checkpoint, "checkpoint"))
    dataset = _eval_set(args.data)
    _check_fit(model_cfg, dataset, "evaluation set")
    accuracy, confusion = evaluate(params, model_cfg, dataset)
    margin = model_cfg.loss.margin or 0.4
    fraction = margin_statistics(params, model_cfg, dataset, margin).fraction
    print(f"accuracy {accuracy:.4f} on {len(dataset)} sequences")
    print(f"score gap >= {margin:g}: {fraction:.4f}")
    print("confusion (rows true, columns predicted):")
    for row in confusion:
        print("  " + " ".join(f"{v:5d}" for v in row))
    report = RunReport("eval", model_cfg.seed, config=config_to_dict(model_cfg, train_cfg))
    report.metrics.update(accuracy=accuracy, margin_fraction=fraction)
    t = report.table("confusion", ["true"] + [f"pred_{c}" for c in range(model_cfg.n_classes)])
    for c, row in enumerate(confusion):
        t.add(c, *(int(v) for v in row))
    _finish(report, args.out, start)
    return EXIT_OK


def _cell_params(plan: str, cfg: ModelConfig) -> str:
    if plan == "loss":
        return cfg.loss.pair
    if plan == "slnl":
        return f"({cfg.m1}, {cfg.m2})"
    return cfg.attention


def cmd_ablate(args) -> int:
    start = time.perf_counter()
    model_cfg, train_cfg, _ = _configs(args)
    _require(args.data, "data")
    if not args.data.is_dir():
        raise UsageError("ablate needs a directory holding train.skds and test.skds")
    train_set, test_set = _splits(args.data)
    if test_set is None:
        raise UsageError(f"no test.skds in {args.data}")
    _check_fit(model_cfg, train_set, "training set")
    _check_fit(model_cfg, test_set, "test set")

    report = RunReport("ablate", train_cfg.seed, config=config_to_dict(model_cfg, train_cfg))
    report.config["ablate.plan"] = args.plan
    t = report.table("ablation", ["cell", "params", "accuracy", "margin_fraction", "train_loss",
                                  "epochs", "seconds"])
    for cell in PLANS[args.plan](model_cfg):
        res, _ = run_cell(cell, train_set, test_set, train_cfg)
        t.add(cell.label, _cell_params(args.plan, cell.cfg), res.accuracy, res.margin_fraction,
              res.train_loss, res.epochs, res.seconds)
        print(f"{cell.label:<14s} {_cell_params(args.plan, cell.cfg):<10s} accuracy {res.accuracy:.4f}"
              f"  gap>=m {res.margin_fraction:.4f}  ({res.seconds:.0f}s)", flush=True)
    _finish(report, args.out or Path(f"ablate_{args.plan}.report"), start)
    return EXIT_OK


LOSS_CURVES = (("CE", 0.0, 0.0), ("FL", 2.0, 0.0), ("SMCE", 0.0, 0.4), ("SMFL", 2.0, 0.4))


def loss_curve_rows(n: int = 200) -> tuple[list[str], np.ndarray]:
    """Loss against true-class probability for the four (gamma, m) settings
    plus the bare soft-margin term."""
    p = np.linspace(0.005, 1.0, n)
    cols = [p]
    names = ["p_t"]
    for kind, g, m in LOSS_CURVES:
        names.append(f"{kind}({g:g},{m:g})")
        cols.append(smfl(p, g, m) if g or m else cross_entropy(p))
    names.append("SM(0.4)")
    cols.append(sm_term(p, 0.4))
    return names, np.stack(cols, axis=1)


def _write_tsv(path: Path, header, rows) -> None:
    lines = ["\t".join(header)] + ["\t".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {path}")


def cmd_plot(args) -> int:
    out = args.out or Path("plots")
    report = load_report(_require(args.report, "report")) if args.report else None
    out.mkdir(parents=True, exist_ok=True)
    names, values = loss_curve_rows()
    _write_tsv(out / "loss_curves.tsv", names, [[repr(float(v)) for v in row] for row in values])
    if report is None:
        return EXIT_OK
    if "epochs" in report.tables:
        t = report.tables["epochs"]
        _write_tsv(out / "training_curves.tsv", t.columns, t.rows)
    if "ablation" in report.tables:
        t = report.tables["ablation"]
        plan = report.config.get("ablate.plan", "ablation")
        _write_tsv(out / f"ablation_{plan}.tsv", ["cell", "params", "accuracy"],
                   zip(t.column("cell"), t.column("params"), t.column("accuracy")))
    if "checks" in report.tables:
        t = report.tables["checks"]
        _write_tsv(out / "checks.tsv", ["check", "observed", "tolerance"],
                   zip(t.column("check"), t.column("observed"), t.column("tolerance")))
    return EXIT_OK


COMMANDS = {"verify": cmd_verify, "gendata": cmd_gendata, "train": cmd_train, "eval": cmd_eval,
            "ablate": cmd_ablate, "plot": cmd_plot}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError, FormatError, DatasetFormatError, ReportFormatError,
            FileNotFoundError, IsADirectoryError) as exc:
        print(f"slnl {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
