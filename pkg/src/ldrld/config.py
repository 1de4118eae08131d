"""Experiment configuration: JSON files, dotted overrides, strict validation.

A config file is a JSON object with sections ``dataset``, ``teacher``,
``student``, ``distill``, plus ``seeds`` and ``out_dir``.  Unknown keys are
rejected with the full dotted path so typos fail loudly instead of being
ignored.  ``--set section.key=value`` overrides are applied to the raw
dictionary before validation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

from .data import Dataset, load_delimited, load_idx, make_blobs
from .losses import DistillConfig
from .models import MlpSpec
from .pairs import AdwParams
from .training import TrainSpec

__all__ = [
    "ConfigError",
    "BlobsConfig",
    "DelimitedConfig",
    "IdxConfig",
    "ModelTrainConfig",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "config_to_dict",
    "apply_overrides",
    "parse_sweep",
    "build_datasets",
]


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


@dataclass(frozen=True)
class BlobsConfig:
    classes: int = 20
    per_class_train: int = 100
    per_class_eval: int = 25
    dim: int = 32
    spread: float = 1.0
    seed: int = 9


@dataclass(frozen=True)
class DelimitedConfig:
    train_path: str
    eval_path: str
    delimiter: str = ","
    label_column: int = -1
    has_header: bool = False


@dataclass(frozen=True)
class IdxConfig:
    train_images: str
    train_labels: str
    eval_images: str
    eval_labels: str


@dataclass(frozen=True)
class ModelTrainConfig:
    mlp: MlpSpec
    train: TrainSpec


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: BlobsConfig | DelimitedConfig | IdxConfig
    teacher: ModelTrainConfig
    student: ModelTrainConfig
    distill: DistillConfig
    seeds: tuple[int, ...]
    out_dir: str

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ConfigError("seeds must list at least one seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError(f"seeds contain duplicates: {self.seeds}")


def _require(raw: dict, allowed: set[str], required: set[str], where: str) -> None:
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected an object, got {type(raw).__name__}")
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {unknown}")
    missing = sorted(required - set(raw))
    if missing:
        raise ConfigError(f"{where}: missing required key(s) {missing}")


def _build(cls, raw: dict, where: str, **extra):
    try:
        return cls(**raw, **extra)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"{where}: {err}") from err


_DATASET_KINDS = {
    "blobs": (BlobsConfig, set()),
    "delimited": (DelimitedConfig, {"train_path", "eval_path"}),
    "idx": (IdxConfig, {"train_images", "train_labels", "eval_images", "eval_labels"}),
}


def _parse_dataset(raw: dict) -> BlobsConfig | DelimitedConfig | IdxConfig:
    if not isinstance(raw, dict) or "kind" not in raw:
        raise ConfigError("dataset: missing 'kind'")
    kind = raw["kind"]
    if kind not in _DATASET_KINDS:
        raise ConfigError(f"dataset.kind: {kind!r} is not one of {sorted(_DATASET_KINDS)}")
    cls, required = _DATASET_KINDS[kind]
    body = {k: v for k, v in raw.items() if k != "kind"}
    fields = {f for f in cls.__dataclass_fields__}
    _require(body, fields, required, f"dataset({kind})")
    return _build(cls, body, f"dataset({kind})")


def _parse_mlp(raw: dict, where: str) -> MlpSpec:
    fields = set(MlpSpec.__dataclass_fields__)
    _require(raw, fields, {"input_dim", "hidden_dims", "num_classes"}, where)
    raw = dict(raw)
    raw["hidden_dims"] = tuple(raw["hidden_dims"])
    return _build(MlpSpec, raw, where)


def _parse_train(raw: dict, where: str) -> TrainSpec:
    fields = set(TrainSpec.__dataclass_fields__)
    _require(raw, fields, {"epochs"}, where)
    raw = dict(raw)
    if "lr_drop_epochs" in raw:
        raw["lr_drop_epochs"] = tuple(raw["lr_drop_epochs"])
    return _build(TrainSpec, raw, where)


def _parse_model_train(raw: dict, where: str) -> ModelTrainConfig:
    _require(raw, {"mlp", "train"}, {"mlp", "train"}, where)
    return ModelTrainConfig(
        mlp=_parse_mlp(raw["mlp"], f"{where}.mlp"),
        train=_parse_train(raw["train"], f"{where}.train"),
    )


def _parse_distill(raw: dict) -> DistillConfig:
    fields = set(DistillConfig.__dataclass_fields__)
    _require(raw, fields, set(), "distill")
    raw = dict(raw)
    if "adw" in raw:
        adw_raw = dict(raw["adw"])
        if "lambda" in adw_raw:  # JSON spelling of the keyword-colliding field
            adw_raw["lambda_"] = adw_raw.pop("lambda")
        _require(adw_raw, {"epsilon", "delta", "lambda_"}, set(), "distill.adw")
        raw["adw"] = _build(AdwParams, adw_raw, "distill.adw")
    return _build(DistillConfig, raw, "distill")


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a raw JSON object into a fully typed ExperimentConfig."""
    _require(
        raw,
        {"dataset", "teacher", "student", "distill", "seeds", "out_dir"},
        {"dataset", "teacher", "student", "seeds", "out_dir"},
        "config",
    )
    seeds = raw["seeds"]
    if not isinstance(seeds, list) or not all(isinstance(s, int) for s in seeds):
        raise ConfigError(f"seeds: expected a list of integers, got {seeds!r}")
    return ExperimentConfig(
        dataset=_parse_dataset(raw["dataset"]),
        teacher=_parse_model_train(raw["teacher"], "teacher"),
        student=_parse_model_train(raw["student"], "student"),
        distill=_parse_distill(raw.get("distill", {})),
        seeds=tuple(seeds),
        out_dir=str(raw["out_dir"]),
    )


def apply_overrides(raw: dict, overrides: list[str]) -> dict:
    """Apply ``section.key=value`` strings to a copy of the raw config dict.

    Values parse as JSON where possible (numbers, booleans, lists) and fall
    back to plain strings.  Intermediate sections must already exist.
    """
    out = json.loads(json.dumps(raw))  # deep copy
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        dotted, text = item.split("=", 1)
        path = dotted.strip().split(".")
        if not all(path):
            raise ConfigError(f"override {item!r} has an empty path segment")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = out
        for seg in path[:-1]:
            if not isinstance(node, dict) or seg not in node:
                raise ConfigError(f"override {item!r}: no such section {seg!r}")
            node = node[seg]
        if not isinstance(node, dict):
            raise ConfigError(f"override {item!r}: {path[-2]!r} is not an object")
        node[path[-1]] = value
    return out


def load_config(path, overrides: list[str] | None = None) -> tuple[ExperimentConfig, dict]:
    """Load, override and validate a config file; returns (config, raw echo)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: invalid JSON ({err})") from err
    if overrides:
        raw = apply_overrides(raw, list(overrides))
    cfg = parse_config(raw)
    return cfg, config_to_dict(cfg)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Fully resolved config as plain JSON data; parsing it back is the identity."""
    dataset: dict[str, Any] = {"kind": {BlobsConfig: "blobs", DelimitedConfig: "delimited", IdxConfig: "idx"}[type(cfg.dataset)]}
    dataset.update({k: getattr(cfg.dataset, k) for k in cfg.dataset.__dataclass_fields__})

    def model_train(mt: ModelTrainConfig) -> dict:
        return {
            "mlp": {
                "input_dim": mt.mlp.input_dim,
                "hidden_dims": list(mt.mlp.hidden_dims),
                "num_classes": mt.mlp.num_classes,
                "seed": mt.mlp.seed,
            },
            "train": {
                "epochs": mt.train.epochs,
                "batch_size": mt.train.batch_size,
                "lr": mt.train.lr,
                "momentum": mt.train.momentum,
                "weight_decay": mt.train.weight_decay,
                "warmup_epochs": mt.train.warmup_epochs,
                "lr_drop_epochs": list(mt.train.lr_drop_epochs),
                "lr_drop_factor": mt.train.lr_drop_factor,
                "seed": mt.train.seed,
            },
        }

    return {
        "dataset": dataset,
        "teacher": model_train(cfg.teacher),
        "student": model_train(cfg.student),
        "distill": {
            "d": cfg.distill.d,
            "tau": cfg.distill.tau,
            "alpha": cfg.distill.alpha,
            "beta": cfg.distill.beta,
            "gamma": cfg.distill.gamma,
            "adw": {
                "epsilon": cfg.distill.adw.epsilon,
                "delta": cfg.distill.adw.delta,
                "lambda": cfg.distill.adw.lambda_,
            },
            "adw_enabled": cfg.distill.adw_enabled,
            "tau_square_scaling": cfg.distill.tau_square_scaling,
        },
        "seeds": list(cfg.seeds),
        "out_dir": cfg.out_dir,
    }


def parse_sweep(text: str) -> tuple[str, list]:
    """Parse ``key=a..b`` (inclusive integer range) or ``key=v1,v2,...``.

    A bare key like ``d`` resolves to ``distill.d``.
    """
    if "=" not in text:
        raise ConfigError(f"sweep {text!r} is not of the form key=values")
    key, spec = text.split("=", 1)
    key = key.strip()
    if "." not in key:
        key = f"distill.{key}"
    spec = spec.strip()
    if ".." in spec:
        lo_text, hi_text = spec.split("..", 1)
        try:
            lo, hi = int(lo_text), int(hi_text)
        except ValueError:
            raise ConfigError(f"sweep range {spec!r} must be integer a..b") from None
        if hi < lo:
            raise ConfigError(f"sweep range {spec!r} is empty")
        return key, list(range(lo, hi + 1))
    values = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            raise ConfigError(f"sweep {text!r} has an empty value")
        try:
            values.append(json.loads(part))
        except json.JSONDecodeError:
            raise ConfigError(f"sweep value {part!r} is not a number") from None
    return key, values


def build_datasets(cfg: ExperimentConfig) -> tuple[Dataset, Dataset]:
    """Materialize the (train, eval) datasets described by the config."""
    ds = cfg.dataset
    if isinstance(ds, BlobsConfig):
        train = make_blobs(ds.classes, ds.per_class_train, ds.dim, ds.spread, ds.seed, "train")
        eval_ = make_blobs(ds.classes, ds.per_class_eval, ds.dim, ds.spread, ds.seed, "eval")
    elif isinstance(ds, DelimitedConfig):
        train = load_delimited(
            ds.train_path, ds.delimiter, ds.label_column, ds.has_header, split="train"
        )
        eval_ = load_delimited(
            ds.eval_path,
            ds.delimiter,
            ds.label_column,
            ds.has_header,
            num_classes=train.num_classes,
            split="eval",
        )
    else:
        train = load_idx(ds.train_images, ds.train_labels, "train")
        eval_ = load_idx(ds.eval_images, ds.eval_labels, "eval")
    if train.num_classes != eval_.num_classes:
        raise ConfigError(
            f"train has {train.num_classes} classes but eval has {eval_.num_classes}"
        )
    if train.features.shape[1] != eval_.features.shape[1]:
        raise ConfigError(
            f"train feature dim {train.features.shape[1]} differs from eval "
            f"{eval_.features.shape[1]}"
        )
    return train, eval_
