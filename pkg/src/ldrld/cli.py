"""Command line harness: train a teacher, distill students, evaluate, verify.

Exit codes: 0 on success, 1 when an invariant check fails, 2 on usage,
configuration or I/O errors.  The LDRLD_LOG environment variable
(debug/info/warning/quiet) controls log verbosity; reports land in the
config's out_dir as canonical JSON plus per-run CSV curves.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from .checks import run_losscheck
from .config import (
    ConfigError,
    ExperimentConfig,
    build_datasets,
    load_config,
    parse_sweep,
)
from .models import Mlp, load_checkpoint, save_checkpoint
from .reports import (
    SCHEMA_VERSION,
    aggregate_runs,
    record_summary,
    write_curves_csv,
    write_report,
    write_timing,
)
from .training import distill, evaluate, train_supervised

log = logging.getLogger("ldrld")

_LOG_LEVELS = {
    "debug": logging.DEBUG,
    "info": logging.INFO,
    "warning": logging.WARNING,
    "quiet": logging.ERROR,
}


def _setup_logging() -> None:
    name = os.environ.get("LDRLD_LOG", "warning").strip().lower()
    logging.basicConfig(
        level=_LOG_LEVELS.get(name, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )


def _gather_overrides(args) -> list[str]:
    """Fold --out and --seeds into ordinary dotted overrides so the config
    echo (and therefore report regeneration) stays self-contained."""
    overrides = list(args.set or [])
    if getattr(args, "out", None):
        overrides.append(f"out_dir={json.dumps(args.out)}")
    if getattr(args, "seeds", None):
        overrides.append(f"seeds=[{args.seeds}]")
    return overrides


def _prepare(args) -> tuple[ExperimentConfig, dict, Path]:
    cfg, echo = load_config(args.config, _gather_overrides(args))
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return cfg, echo, out


def cmd_train_teacher(args) -> int:
    cfg, echo, out = _prepare(args)
    train, eval_ = build_datasets(cfg)
    log.info("training teacher on %d samples, eval on %d", len(train), len(eval_))
    started = time.perf_counter()
    model, record = train_supervised(cfg.teacher.mlp, cfg.teacher.train, train, eval_)
    elapsed = time.perf_counter() - started

    ckpt_name = "teacher.ckpt"
    save_checkpoint(out / ckpt_name, model)
    runs = [record_summary(record)]
    write_report(
        out / "teacher_report.json",
        {
            "schema_version": SCHEMA_VERSION,
            "kind": "train-teacher",
            "config": echo,
            "runs": runs,
            "aggregate": aggregate_runs(runs),
            "checkpoints": [ckpt_name],
        },
    )
    write_curves_csv(out / "teacher_curves.csv", record)
    write_timing(out / "teacher_report.timing.json", elapsed)
    print(
        f"teacher: train acc {record.train_accuracy[-1]:.4f}, "
        f"eval acc {record.eval_accuracy[-1]:.4f} -> {out / ckpt_name}"
    )
    return 0


def _distill_runs(cfg: ExperimentConfig, teacher: Mlp, train, eval_, out: Path):
    runs = []
    ckpts = []
    for seed in cfg.seeds:
        mlp = replace(cfg.student.mlp, seed=seed)
        tspec = replace(cfg.student.train, seed=seed)
        model, record = distill(teacher, mlp, tspec, cfg.distill, train, eval_)
        name = f"student_seed{seed}.ckpt"
        save_checkpoint(out / name, model)
        write_curves_csv(out / f"curves_seed{seed}.csv", record)
        runs.append(record_summary(record))
        ckpts.append(name)
        log.info("seed %d: eval acc %.4f", seed, record.eval_accuracy[-1])
    return runs, ckpts


def _scratch_runs(cfg: ExperimentConfig, train, eval_):
    runs = []
    for seed in cfg.seeds:
        mlp = replace(cfg.student.mlp, seed=seed)
        tspec = replace(cfg.student.train, seed=seed)
        _, record = train_supervised(mlp, tspec, train, eval_)
        runs.append(record_summary(record))
        log.info("scratch seed %d: eval acc %.4f", seed, record.eval_accuracy[-1])
    return runs


def cmd_distill(args) -> int:
    cfg, echo, out = _prepare(args)
    teacher = load_checkpoint(args.teacher)
    train, eval_ = build_datasets(cfg)
    if args.sweep:
        return _run_sweep(args, cfg, echo, teacher, train, eval_, out)

    started = time.perf_counter()
    runs, ckpts = _distill_runs(cfg, teacher, train, eval_, out)
    report = {
        "schema_version": SCHEMA_VERSION,
        "kind": "distill",
        "config": echo,
        "runs": runs,
        "aggregate": aggregate_runs(runs),
        "checkpoints": ckpts,
        "teacher_checkpoint": str(args.teacher),
    }
    if args.baseline:
        base_runs = _scratch_runs(cfg, train, eval_)
        base_agg = aggregate_runs(base_runs)
        report["baseline"] = {"runs": base_runs, "aggregate": base_agg}
        report["delta_mean_eval_accuracy"] = (
            report["aggregate"]["mean_final_eval_accuracy"]
            - base_agg["mean_final_eval_accuracy"]
        )
    elapsed = time.perf_counter() - started

    write_report(out / "distill_report.json", report)
    write_timing(out / "distill_report.timing.json", elapsed)
    line = f"distill: mean eval acc {report['aggregate']['mean_final_eval_accuracy']:.4f}"
    if args.baseline:
        line += (
            f" (scratch {report['baseline']['aggregate']['mean_final_eval_accuracy']:.4f},"
            f" delta {report['delta_mean_eval_accuracy']:+.4f})"
        )
    print(line)
    return 0


def _run_sweep(args, cfg, echo, teacher, train, eval_, out: Path) -> int:
    key, values = parse_sweep(args.sweep)
    leaf = key.rsplit(".", 1)[-1]
    started = time.perf_counter()
    runs_by_value = {}
    best_value = None
    best_acc = -1.0
    for value in values:
        sub_over = _gather_overrides(args) + [f"{key}={json.dumps(value)}"]
        sub_cfg, sub_echo = load_config(args.config, sub_over)
        sub_out = out / f"{leaf}_{value}"
        sub_out.mkdir(parents=True, exist_ok=True)
        runs, ckpts = _distill_runs(sub_cfg, teacher, train, eval_, sub_out)
        agg = aggregate_runs(runs)
        report_path = sub_out / "distill_report.json"
        write_report(
            report_path,
            {
                "schema_version": SCHEMA_VERSION,
                "kind": "distill",
                "config": sub_echo,
                "runs": runs,
                "aggregate": agg,
                "checkpoints": ckpts,
                "teacher_checkpoint": str(args.teacher),
            },
        )
        rel = str(report_path.relative_to(out))
        runs_by_value[str(value)] = {"aggregate": agg, "report_path": rel}
        if agg["mean_final_eval_accuracy"] > best_acc:
            best_acc = agg["mean_final_eval_accuracy"]
            best_value = value
        print(f"sweep {leaf}={value}: mean eval acc {agg['mean_final_eval_accuracy']:.4f}")
    elapsed = time.perf_counter() - started

    write_report(
        out / "sweep_report.json",
        {
            "schema_version": SCHEMA_VERSION,
            "kind": "sweep",
            "config": echo,
            "sweep_key": key,
            "values": values,
            "runs_by_value": runs_by_value,
            "best_value": best_value,
        },
    )
    write_timing(out / "sweep_report.timing.json", elapsed)
    print(f"sweep: best {leaf}={best_value} with mean eval acc {best_acc:.4f}")
    return 0


def cmd_eval(args) -> int:
    cfg, echo, out = _prepare(args)
    model = load_checkpoint(args.ckpt)
    _, eval_ = build_datasets(cfg)
    started = time.perf_counter()
    acc = evaluate(model, eval_)
    elapsed = time.perf_counter() - started
    write_report(
        out / "eval_report.json",
        {
            "schema_version": SCHEMA_VERSION,
            "kind": "eval",
            "config": echo,
            "checkpoint": str(args.ckpt),
            "split": eval_.split,
            "accuracy": acc,
            "num_samples": len(eval_),
        },
    )
    write_timing(out / "eval_report.timing.json", elapsed)
    print(f"eval: accuracy {acc:.4f} on {len(eval_)} samples")
    return 0


def cmd_losscheck(args) -> int:
    results = run_losscheck()
    width = max(len(r.name) for r in results)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"[{status}] {r.name:<{width}}  {r.detail}")
    failed = [r for r in results if not r.passed]
    if failed:
        print(f"{len(failed)} of {len(results)} checks failed")
        return 1
    print(f"all {len(results)} checks passed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ldrld",
        description="Relational logit distillation: training, evaluation and self-checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, teacher: bool = False) -> None:
        p.add_argument("--config", required=True, help="path to a JSON experiment config")
        p.add_argument(
            "--set",
            action="append",
            metavar="KEY=VALUE",
            help="dotted config override, repeatable (e.g. distill.alpha=4.0)",
        )
        p.add_argument("--out", help="output directory (overrides config out_dir)")
        if teacher:
            p.add_argument("--teacher", required=True, help="teacher checkpoint path")
            p.add_argument("--seeds", help="comma-separated seed list (overrides config)")

    p = sub.add_parser("train-teacher", help="train the teacher and write its checkpoint")
    common(p)
    p.set_defaults(fn=cmd_train_teacher)

    p = sub.add_parser("distill", help="distill students from a teacher checkpoint")
    common(p, teacher=True)
    p.add_argument(
        "--baseline",
        action="store_true",
        help="also train from-scratch baselines and report the accuracy delta",
    )
    p.add_argument("--sweep", metavar="KEY=A..B", help="sweep one config value (e.g. d=2..10)")
    p.set_defaults(fn=cmd_distill)

    p = sub.add_parser("sweep", help="sweep one config value across distillation runs")
    common(p, teacher=True)
    p.add_argument(
        "--sweep", metavar="KEY=A..B", required=True, help="value range, e.g. d=2..10 or d=2,3,5"
    )
    p.set_defaults(fn=cmd_distill, baseline=False)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the config's eval split")
    common(p)
    p.add_argument("--ckpt", required=True, help="checkpoint to evaluate")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("losscheck", help="run the loss/weight/gradient invariant suite")
    p.set_defaults(fn=cmd_losscheck)
    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.fn(args)
    except (ConfigError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
