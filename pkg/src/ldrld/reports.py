"""Deterministic JSON reports, loss-curve CSVs and schema validation.

Reports are written with sorted keys, fixed indentation and shortest
round-trip float encoding, so rerunning a command with the same config and
seeds reproduces every output file byte for byte.  Wall-clock timing, the
one genuinely non-reproducible quantity, goes into a separate ``.timing``
sidecar that is excluded from that guarantee.
"""

from __future__ import annotations

import json
from importlib import resources

import jsonschema
import numpy as np

from .losses import LossBreakdown
from .training import TrainRecord

__all__ = [
    "SCHEMA_VERSION",
    "load_schema",
    "validate_report",
    "dump_json",
    "write_report",
    "write_timing",
    "record_summary",
    "aggregate_runs",
    "write_curves_csv",
]

SCHEMA_VERSION = 1


def _jsonify(value):
    """numpy scalars/arrays and tuples down to plain JSON data."""
    if isinstance(value, dict):
        return {str(k): _jsonify(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonify(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonify(v) for v in value.tolist()]
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    return value


def load_schema() -> dict:
    with resources.files("ldrld.schemas").joinpath("report.schema.json").open("r") as fh:
        return json.load(fh)


def validate_report(report: dict) -> None:
    """Raise jsonschema.ValidationError if the report does not fit the schema."""
    jsonschema.validate(report, load_schema())


def dump_json(path, obj: dict) -> None:
    """Canonical JSON: sorted keys, two-space indent, trailing newline."""
    text = json.dumps(_jsonify(obj), sort_keys=True, indent=2, ensure_ascii=True)
    with open(path, "w", encoding="ascii") as fh:
        fh.write(text + "\n")


def write_report(path, report: dict) -> None:
    """Validate against the packaged schema, then write canonically."""
    report = _jsonify(report)
    validate_report(report)
    dump_json(path, report)


def write_timing(path, seconds: float) -> None:
    dump_json(path, {"wall_clock_sec": float(seconds)})


def _breakdown_dict(bd: LossBreakdown) -> dict:
    return {
        "task": bd.task,
        "weighted_pairs": bd.weighted_pairs,
        "llki": bd.llki,
        "rntk": bd.rntk,
        "total": bd.total,
    }


def record_summary(record: TrainRecord) -> dict:
    """One run's curves and final numbers, ready for a report's ``runs`` list."""
    return {
        "seed": record.seed,
        "train_loss": [_breakdown_dict(bd) for bd in record.train_loss],
        "train_accuracy": list(record.train_accuracy),
        "eval_accuracy": list(record.eval_accuracy),
        "lr": list(record.lr),
        "final_train_accuracy": record.train_accuracy[-1],
        "final_eval_accuracy": record.eval_accuracy[-1],
    }


def aggregate_runs(runs: list[dict]) -> dict:
    """Mean and population stddev of the final accuracies across runs."""
    train = np.array([r["final_train_accuracy"] for r in runs], dtype=np.float64)
    ev = np.array([r["final_eval_accuracy"] for r in runs], dtype=np.float64)
    return {
        "mean_final_train_accuracy": float(train.mean()),
        "std_final_train_accuracy": float(train.std()),
        "mean_final_eval_accuracy": float(ev.mean()),
        "std_final_eval_accuracy": float(ev.std()),
    }


def write_curves_csv(path, record: TrainRecord) -> None:
    """Per-epoch loss terms and accuracies as a flat CSV."""
    header = "epoch,task,weighted_pairs,llki,rntk,total,train_accuracy,eval_accuracy,lr"
    lines = [header]
    for e, bd in enumerate(record.train_loss):
        fields = [
            str(e),
            repr(bd.task),
            repr(bd.weighted_pairs),
            repr(bd.llki),
            repr(bd.rntk),
            repr(bd.total),
            repr(record.train_accuracy[e]),
            repr(record.eval_accuracy[e]),
            repr(record.lr[e]),
        ]
        lines.append(",".join(fields))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
