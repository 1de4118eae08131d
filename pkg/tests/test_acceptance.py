"""Acceptance gate: nine behavioral checks, one test per criterion.

Criteria 1-6 are numerical properties with pinned tolerances; 7 and 8 run
the calibrated 20-class desk benchmark (spread 0.4 puts a linear probe at
0.674 eval accuracy; alpha=4, beta=7 came out of a 3x3 grid over {1,4,7});
9 reruns the CLI and compares output bytes.  Expensive desk artifacts are
built once and shared between criteria 7 and 8.
"""

import json
import time
from dataclasses import replace

import numpy as np

from ldrld import (
    AdwParams,
    DistillConfig,
    MlpSpec,
    Tape,
    Tensor,
    TrainSpec,
    adw,
    distill,
    erd,
    generate_pairs,
    irw,
    ldrld_objective,
    ldrld_total,
    make_blobs,
    pair_loss,
    rank_by_student,
    train_supervised,
)
from ldrld.cli import main
from ldrld.oracle import fd_gradient, oracle_ldrld, oracle_pair_loss

# calibrated desk benchmark: 20 classes, teacher 2x256, student 1x32
DESK_DATA = dict(classes=20, per_class_train=100, per_class_eval=50,
                 dim=32, spread=0.4, seed=9)
DESK_TEACHER_MLP = MlpSpec(input_dim=32, hidden_dims=(256, 256), num_classes=20, seed=1)
DESK_TEACHER_TRAIN = TrainSpec(epochs=30, batch_size=64, lr=0.2, momentum=0.9,
                               weight_decay=1e-2, warmup_epochs=3,
                               lr_drop_epochs=(18, 22, 26), seed=1)
DESK_STUDENT_MLP = MlpSpec(input_dim=32, hidden_dims=(32,), num_classes=20, seed=1)
DESK_STUDENT_TRAIN = TrainSpec(epochs=25, batch_size=64, lr=0.1, momentum=0.9,
                               weight_decay=1e-4, warmup_epochs=2,
                               lr_drop_epochs=(15, 19, 22), seed=1)
DESK_SEEDS = (1, 2, 3)
DESK_ALPHA = 4.0
DESK_BETA = 7.0

_desk_cache = {}


def random_sample(rng, min_classes=5, max_classes=30):
    c = int(rng.integers(min_classes, max_classes + 1))
    cfg = DistillConfig(
        d=int(rng.integers(2, c + 1)),
        tau=float(rng.uniform(0.5, 8.0)),
        alpha=float(rng.uniform(0.0, 4.0)),
        beta=float(rng.uniform(0.0, 4.0)),
    )
    z_t = rng.normal(scale=3.0, size=c)
    z_s = rng.normal(scale=3.0, size=c)
    label = int(rng.integers(c))
    return z_t, z_s, label, cfg


def test_criterion_1_oracle_equivalence():
    rng = np.random.default_rng(101)
    started = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        z_t, z_s, label, cfg = random_sample(rng)
        got = ldrld_total(z_t, z_s, label, cfg).total
        want = oracle_ldrld(z_t, z_s, label, cfg)
        worst = max(worst, abs(got - want))
    elapsed = time.perf_counter() - started
    print(f"criterion 1: worst |delta| {worst:.3e} over 1000 samples in {elapsed:.1f}s")
    assert worst < 1e-9
    assert elapsed < 30.0


def test_criterion_2_gradients_match_finite_differences():
    rng = np.random.default_rng(202)
    started = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        z_t, z_s_data, label, cfg = random_sample(rng, max_classes=20)
        order = rank_by_student(z_s_data)
        with Tape():
            z_s = Tensor(z_s_data, requires_grad=True)
            total, _ = ldrld_objective(z_t, z_s, label, cfg, order=order)
            total.backward()
        fd = fd_gradient(
            lambda x: ldrld_total(z_t, x, label, cfg, order=order).total, z_s_data
        )
        rel = np.abs(z_s.grad - fd) / np.maximum(
            np.maximum(np.abs(z_s.grad), np.abs(fd)), 1e-7
        )
        worst = max(worst, float(rel.max()))
    elapsed = time.perf_counter() - started
    print(f"criterion 2: worst rel err {worst:.3e} over 200 samples in {elapsed:.1f}s")
    assert worst < 1e-4
    assert elapsed < 60.0


def test_criterion_3_pair_combination_structure():
    for d in range(2, 31):
        assert len(generate_pairs(d)) == d * (d - 1) // 2
    pairs7 = generate_pairs(7)
    brute = {(i, j) for i in range(1, 8) for j in range(1, 8) if i < j}
    assert len(pairs7) == 21
    assert set(pairs7) == brute
    print("criterion 3: pair counts d=2..30 and the 21-pair set at d=7 verified")


def test_criterion_4_adaptive_decay_golden_values_and_monotonicity():
    params = AdwParams()  # epsilon=1.50, delta=2.0, lambda=0.05
    assert abs(irw(1, 2, params) - 0.4) < 1e-6
    assert abs(erd(1, 2, params) - 2.0 * np.exp(-0.15)) < 1e-6
    assert abs(adw(1, 2, params) - (1.0 / 2.5) * 2.0 * np.exp(-0.15)) < 1e-6

    # closer ranks weigh more: strictly larger IRW for strictly smaller gap
    all_pairs = [(i, j) for i in range(1, 21) for j in range(1, 21) if i < j]
    for (i1, j1) in all_pairs:
        for (i2, j2) in all_pairs:
            if (j1 - i1) < (j2 - i2):
                assert irw(i1, j1, params) > irw(i2, j2, params)
            if (i1 + j1) < (i2 + j2):
                assert erd(i1, j1, params) > erd(i2, j2, params)
    print("criterion 4: golden weights and both monotonicities hold on ranks <= 20")


def test_criterion_5_loss_term_identities():
    rng = np.random.default_rng(505)
    for _ in range(500):
        z_t, z_s, label, cfg = random_sample(rng)

        bd = ldrld_total(z_t, z_s, label, cfg)
        assert bd.weighted_pairs >= 0.0
        assert bd.llki >= 0.0
        assert bd.rntk >= 0.0

        agree = ldrld_total(z_t, z_t.copy(), label, cfg)
        assert agree.weighted_pairs == 0.0
        assert agree.llki == 0.0
        assert agree.rntk == 0.0

        shift = float(rng.uniform(-20.0, 20.0))
        shifted = ldrld_total(z_t + shift, z_s + shift, label, cfg)
        assert abs(shifted.weighted_pairs - bd.weighted_pairs) < 1e-10
        assert abs(shifted.llki - bd.llki) < 1e-10
        assert abs(shifted.rntk - bd.rntk) < 1e-10
    print("criterion 5: non-negativity, exact agreement zeros and shift "
          "invariance hold on 500 configurations")


def test_criterion_6_reductions():
    train = make_blobs(6, 15, 5, 0.3, seed=17, split="train")
    evald = make_blobs(6, 5, 5, 0.3, seed=17, split="eval")
    teacher, _ = train_supervised(
        MlpSpec(input_dim=5, hidden_dims=(12,), num_classes=6, seed=2),
        TrainSpec(epochs=3, batch_size=16, lr=0.3, seed=2),
        train, evald,
    )

    spec = MlpSpec(input_dim=5, hidden_dims=(4,), num_classes=6, seed=11)
    tspec = TrainSpec(epochs=5, batch_size=16, lr=0.2, momentum=0.9,
                      weight_decay=1e-3, warmup_epochs=1, seed=11)
    cfg = DistillConfig(d=3, alpha=0.0, beta=0.0)
    m_kd, r_kd = distill(teacher, spec, tspec, cfg, train, evald)
    m_ce, r_ce = train_supervised(spec, tspec, train, evald)
    for a, b in zip(m_kd.params, m_ce.params):
        assert np.array_equal(a.data, b.data)  # bit-identical trajectory
    assert r_kd.train_loss == r_ce.train_loss
    assert r_kd.train_accuracy == r_ce.train_accuracy
    assert r_kd.eval_accuracy == r_ce.eval_accuracy

    rng = np.random.default_rng(606)
    worst = 0.0
    for _ in range(100):
        d = int(rng.integers(2, 9))
        cfg_off = DistillConfig(d=d, tau=float(rng.uniform(0.5, 6.0)), adw_enabled=False)
        top_t = rng.normal(scale=3.0, size=d)
        top_s = rng.normal(scale=3.0, size=d)
        got = pair_loss(top_t, top_s, cfg_off).item()
        want = oracle_pair_loss(top_t, top_s, cfg_off)
        worst = max(worst, abs(got - want))
    assert worst < 1e-10
    print(f"criterion 6: zero-multiplier run is bit-identical to supervised; "
          f"unweighted pair loss matches the oracle (worst |delta| {worst:.2e})")


def _desk():
    """Teacher, scratch baseline and the three distillation arms, built once."""
    if _desk_cache:
        return _desk_cache

    train = make_blobs(DESK_DATA["classes"], DESK_DATA["per_class_train"],
                       DESK_DATA["dim"], DESK_DATA["spread"], DESK_DATA["seed"], "train")
    evald = make_blobs(DESK_DATA["classes"], DESK_DATA["per_class_eval"],
                       DESK_DATA["dim"], DESK_DATA["spread"], DESK_DATA["seed"], "eval")

    started = time.perf_counter()
    teacher, teacher_rec = train_supervised(
        DESK_TEACHER_MLP, DESK_TEACHER_TRAIN, train, evald
    )

    def arm(alpha, beta, d=7):
        accs = []
        for seed in DESK_SEEDS:
            spec = replace(DESK_STUDENT_MLP, seed=seed)
            tspec = replace(DESK_STUDENT_TRAIN, seed=seed)
            if alpha == 0.0 and beta == 0.0:
                _, rec = train_supervised(spec, tspec, train, evald)
            else:
                cfg = DistillConfig(d=d, tau=4.0, alpha=alpha, beta=beta)
                _, rec = distill(teacher, spec, tspec, cfg, train, evald)
            accs.append(rec.eval_accuracy[-1])
        return float(np.mean(accs))

    means = {
        "scratch": arm(0.0, 0.0),
        "local_only": arm(DESK_ALPHA, 0.0),
        "rntk_only": arm(0.0, DESK_BETA),
        "combined": arm(DESK_ALPHA, DESK_BETA),
    }
    elapsed = time.perf_counter() - started

    _desk_cache.update(
        teacher=teacher,
        teacher_eval=teacher_rec.eval_accuracy[-1],
        train=train,
        evald=evald,
        means=means,
        elapsed=elapsed,
        arm=arm,
    )
    return _desk_cache


def test_criterion_7_desk_scale_ablation():
    desk = _desk()
    m = desk["means"]
    print(f"criterion 7: teacher {desk['teacher_eval']:.4f}, scratch {m['scratch']:.4f}, "
          f"local {m['local_only']:.4f}, rntk {m['rntk_only']:.4f}, "
          f"combined {m['combined']:.4f} in {desk['elapsed']:.0f}s")
    assert m["combined"] >= m["scratch"]
    assert m["combined"] >= m["local_only"]
    assert m["combined"] >= m["rntk_only"]
    assert desk["elapsed"] < 600.0


def test_criterion_8_depth_sweep_shape():
    desk = _desk()
    means = {7: desk["means"]["combined"]}
    for d in (2, 3, 5, 10):
        means[d] = desk["arm"](DESK_ALPHA, DESK_BETA, d=d)
    line = ", ".join(f"d={d}: {means[d]:.4f}" for d in sorted(means))
    print(f"criterion 8: {line}")
    others = [means[d] for d in means if d != 2]
    assert means[2] < max(others)


def test_criterion_9_rerun_is_byte_identical(tmp_path):
    config_path = tmp_path / "exp.json"
    out = tmp_path / "out"
    config_path.write_text(json.dumps({
        "dataset": {"kind": "blobs", "classes": 5, "per_class_train": 20,
                    "per_class_eval": 10, "dim": 8, "spread": 0.35, "seed": 3},
        "teacher": {
            "mlp": {"input_dim": 8, "hidden_dims": [16, 16], "num_classes": 5, "seed": 1},
            "train": {"epochs": 5, "batch_size": 25, "lr": 0.3, "warmup_epochs": 1, "seed": 1},
        },
        "student": {
            "mlp": {"input_dim": 8, "hidden_dims": [6], "num_classes": 5, "seed": 1},
            "train": {"epochs": 3, "batch_size": 25, "lr": 0.2, "seed": 1},
        },
        "distill": {"d": 3, "tau": 3.0, "alpha": 1.0, "beta": 1.0},
        "seeds": [1, 2],
        "out_dir": str(out),
    }))

    def run_all():
        assert main(["train-teacher", "--config", str(config_path)]) == 0
        assert main(["distill", "--config", str(config_path),
                     "--teacher", str(out / "teacher.ckpt"), "--baseline"]) == 0
        assert main(["eval", "--config", str(config_path),
                     "--ckpt", str(out / "teacher.ckpt")]) == 0
        assert main(["sweep", "--config", str(config_path),
                     "--teacher", str(out / "teacher.ckpt"), "--sweep", "d=2,3"]) == 0

    def snapshot():
        # wall-clock sidecars are the declared exception to byte identity
        return {
            p.relative_to(out).as_posix(): p.read_bytes()
            for p in sorted(out.rglob("*"))
            if p.is_file() and not p.name.endswith(".timing.json")
        }

    run_all()
    first = snapshot()
    run_all()
    second = snapshot()
    assert set(first) == set(second)
    diffs = [name for name in first if first[name] != second[name]]
    assert diffs == []
    print(f"criterion 9: {len(first)} output files byte-identical across reruns")
