"""Config parsing/overrides/sweeps and canonical report output."""

import json

import jsonschema
import pytest

from ldrld.config import (
    BlobsConfig,
    ConfigError,
    apply_overrides,
    build_datasets,
    config_to_dict,
    load_config,
    parse_config,
    parse_sweep,
)
from ldrld.losses import LossBreakdown
from ldrld.reports import (
    SCHEMA_VERSION,
    aggregate_runs,
    dump_json,
    record_summary,
    validate_report,
    write_curves_csv,
    write_report,
)
from ldrld.training import TrainRecord


def raw_config(**tweaks):
    raw = {
        "dataset": {"kind": "blobs", "classes": 5, "per_class_train": 10,
                    "per_class_eval": 5, "dim": 4, "spread": 0.3, "seed": 2},
        "teacher": {
            "mlp": {"input_dim": 4, "hidden_dims": [8], "num_classes": 5, "seed": 1},
            "train": {"epochs": 2, "batch_size": 16, "lr": 0.2, "seed": 1},
        },
        "student": {
            "mlp": {"input_dim": 4, "hidden_dims": [3], "num_classes": 5, "seed": 2},
            "train": {"epochs": 2, "batch_size": 16, "lr": 0.1, "seed": 2},
        },
        "distill": {"d": 3, "tau": 2.0, "alpha": 1.0, "beta": 1.0},
        "seeds": [1, 2],
        "out_dir": "out",
    }
    raw.update(tweaks)
    return raw


def test_parse_and_round_trip_identity():
    cfg = parse_config(raw_config())
    echoed = config_to_dict(cfg)
    assert parse_config(echoed) == cfg
    assert config_to_dict(parse_config(echoed)) == echoed


def test_unknown_key_reports_dotted_path():
    bad = raw_config()
    bad["teacher"]["train"]["bogus"] = 1
    with pytest.raises(ConfigError, match="teacher.train"):
        parse_config(bad)
    with pytest.raises(ConfigError, match="bogus"):
        parse_config(bad)


def test_missing_section_rejected():
    bad = raw_config()
    del bad["teacher"]
    with pytest.raises(ConfigError, match="teacher"):
        parse_config(bad)


def test_duplicate_seeds_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config(raw_config(seeds=[3, 3]))
    with pytest.raises(ConfigError):
        parse_config(raw_config(seeds=[]))


def test_dataset_kind_required():
    bad = raw_config()
    del bad["dataset"]["kind"]
    with pytest.raises(ConfigError, match="kind"):
        parse_config(bad)


def test_adw_lambda_spelling_maps_to_field():
    raw = raw_config()
    raw["distill"]["adw"] = {"epsilon": 2.0, "delta": 1.0, "lambda": 0.25}
    cfg = parse_config(raw)
    assert cfg.distill.adw.lambda_ == 0.25
    # and the echo spells it back the JSON way
    assert config_to_dict(cfg)["distill"]["adw"]["lambda"] == 0.25


def test_apply_overrides_parses_json_values():
    raw = raw_config()
    out = apply_overrides(
        raw,
        ["distill.alpha=4.0", "seeds=[7]", "student.mlp.hidden_dims=[6,6]", "out_dir=elsewhere"],
    )
    assert out["distill"]["alpha"] == 4.0
    assert out["seeds"] == [7]
    assert out["student"]["mlp"]["hidden_dims"] == [6, 6]
    assert out["out_dir"] == "elsewhere"
    assert raw["distill"]["alpha"] == 1.0  # original untouched


def test_apply_overrides_rejects_bad_paths():
    with pytest.raises(ConfigError):
        apply_overrides(raw_config(), ["nosuch.key=1"])
    with pytest.raises(ConfigError):
        apply_overrides(raw_config(), ["distill"])


def test_load_config_round_trip(tmp_path):
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(raw_config()))
    cfg, echo = load_config(path, overrides=["distill.d=4"])
    assert cfg.distill.d == 4
    assert echo["distill"]["d"] == 4


def test_load_config_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="JSON"):
        load_config(path)


def test_parse_sweep_forms():
    assert parse_sweep("d=2..5") == ("distill.d", [2, 3, 4, 5])
    assert parse_sweep("d=2,3,7") == ("distill.d", [2, 3, 7])
    assert parse_sweep("distill.tau=1.0,4.0") == ("distill.tau", [1.0, 4.0])
    with pytest.raises(ConfigError):
        parse_sweep("d")
    with pytest.raises(ConfigError):
        parse_sweep("d=5..2")
    with pytest.raises(ConfigError):
        parse_sweep("d=a,b")


def test_build_datasets_from_blobs():
    cfg = parse_config(raw_config())
    train, evald = build_datasets(cfg)
    assert len(train) == 50
    assert len(evald) == 25
    assert train.num_classes == evald.num_classes == 5
    assert isinstance(cfg.dataset, BlobsConfig)


def sample_record():
    return TrainRecord(
        seed=3,
        train_loss=[LossBreakdown(1.0, 0.5, 0.25, 0.125, 2.0),
                    LossBreakdown(0.5, 0.25, 0.125, 0.0625, 1.0)],
        train_accuracy=[0.5, 0.75],
        eval_accuracy=[0.4, 0.7],
        lr=[0.05, 0.1],
    )


def test_record_summary_structure():
    s = record_summary(sample_record())
    assert s["seed"] == 3
    assert s["final_eval_accuracy"] == 0.7
    assert len(s["train_loss"]) == 2
    assert s["train_loss"][0]["weighted_pairs"] == 0.5


def test_aggregate_runs_mean_and_population_std():
    runs = [
        {"final_train_accuracy": 0.8, "final_eval_accuracy": 0.6},
        {"final_train_accuracy": 0.6, "final_eval_accuracy": 0.4},
    ]
    agg = aggregate_runs(runs)
    assert agg["mean_final_eval_accuracy"] == pytest.approx(0.5)
    assert agg["std_final_eval_accuracy"] == pytest.approx(0.1)


def test_dump_json_is_canonical(tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    dump_json(a, {"zeta": 1.5, "alpha": [1, 2]})
    dump_json(b, {"alpha": [1, 2], "zeta": 1.5})
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().endswith("\n")
    assert json.loads(a.read_text()) == {"alpha": [1, 2], "zeta": 1.5}


def test_schema_accepts_minimal_eval_report(tmp_path):
    report = {
        "schema_version": SCHEMA_VERSION,
        "kind": "eval",
        "config": config_to_dict(parse_config(raw_config())),
        "checkpoint": "teacher.ckpt",
        "split": "eval",
        "accuracy": 0.75,
        "num_samples": 100,
    }
    validate_report(report)
    out = tmp_path / "eval_report.json"
    write_report(out, report)
    assert json.loads(out.read_text())["accuracy"] == 0.75


def eval_report():
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "eval",
        "config": config_to_dict(parse_config(raw_config())),
        "checkpoint": "x.ckpt",
        "split": "eval",
        "accuracy": 0.5,
        "num_samples": 10,
    }


def test_schema_rejects_unknown_kind():
    report = eval_report()
    report["kind"] = "mystery"
    with pytest.raises(jsonschema.ValidationError):
        validate_report(report)


def test_schema_rejects_extra_top_level_key():
    report = eval_report()
    report["surprise"] = 1
    with pytest.raises(jsonschema.ValidationError):
        validate_report(report)


def test_schema_requires_kind_specific_fields():
    report = eval_report()
    del report["accuracy"]
    with pytest.raises(jsonschema.ValidationError):
        validate_report(report)


def test_schema_accepts_full_distill_report():
    runs = [record_summary(sample_record())]
    report = {
        "schema_version": SCHEMA_VERSION,
        "kind": "distill",
        "config": config_to_dict(parse_config(raw_config())),
        "teacher_checkpoint": "teacher.ckpt",
        "runs": runs,
        "aggregate": aggregate_runs(runs),
        "checkpoints": ["student_seed3.ckpt"],
    }
    validate_report(report)


def test_curves_csv_layout(tmp_path):
    path = tmp_path / "curves.csv"
    write_curves_csv(path, sample_record())
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,task,weighted_pairs,llki,rntk,total,train_accuracy,eval_accuracy,lr"
    assert len(lines) == 3
    first = lines[1].split(",")
    assert first[0] == "0"
    assert float(first[5]) == 2.0
    assert float(first[8]) == 0.05
