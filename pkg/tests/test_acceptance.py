"""Acceptance gate: one test per primary criterion.

Each test records a PASS/FAIL line; the lines are printed together at the end
of the pytest run (see conftest.py). Run just this gate with

    python3 -m pytest tests/test_acceptance.py -v
"""

import time
import warnings

import numpy as np
import pytest
from helpers import make_table, random_table
from oracles import brute_anticipation, brute_ap, brute_class_means, brute_deciles

from trn.checkpoint import checkpoint_from_bytes, checkpoint_to_bytes
from trn.cli import cmd_ablate, main, train_model
from trn.config import load_config
from trn.data import FormatError, dataset_from_bytes, dataset_to_bytes, generate, save_dataset
from trn.metrics import anticipation_report, average_precision, calibrated_ap, decile_cap, per_frame_map
from trn.models import TrnConfig, build_model
from trn.numerics import finite_diff_grad, max_rel_error
from trn.training import evaluate

RESULTS: list[str] = []


def record(number: int, name: str, ok: bool, detail: str) -> bool:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number} {name}: {detail}"
    RESULTS.append(line)
    print(line, flush=True)
    return ok


# Synthetic benchmark. Noise, segment length and epochs were chosen by a sweep;
# the notes ledger lists the alternatives that were measured.
BENCH = dict(
    num_actions=4, feature_dim=16, hidden_dim=32, sequence_len=32, decoder_steps=4,
    precursor_strength=0.7, precursor_len=6, num_videos=50, frames_per_video=600,
    noise=3.0, mean_segment_len=20.0, epochs=20, seed=0,
)
BENCH_SEEDS = [0, 1, 2, 3, 4]
ABLATION_STEPS = [2, 4, 6, 8]
ABLATION_SEEDS = [0, 1]
ABLATION_EPOCHS = 10


@pytest.fixture(scope="module")
def benchmark():
    cfg = load_config(overrides=BENCH)
    train_ds, test_ds = generate(cfg.generator_config()).split(40)
    return cfg, train_ds, test_ds


# 1 ------------------------------------------------------------------------------


def test_gradient_suite():
    t0 = time.perf_counter()
    worst, checked = 0.0, 0
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        for kind in ("trn", "lstm", "ed"):
            D, H, E = (int(v) for v in rng.integers(2, 6, 3))
            K, L, T = int(rng.integers(1, 4)), int(rng.integers(1, 4)), int(rng.integers(2, 6))
            cfg = TrnConfig(feature_dim=D, num_actions=K, hidden_dim=H, decoder_steps=L, score_embed_dim=E, model=kind)
            m = build_model(cfg, seed=seed)
            for k in m.params:
                m.params[k] = m.params[k] + rng.normal(0.0, 0.3, m.params[k].shape)
            B = 1
            x = rng.normal(size=(B, T, D))
            y = rng.integers(0, K + 1, (B, T))
            fl = rng.integers(0, K + 1, (B, T, m.num_anticipated))
            fm = rng.random((B, T, m.num_anticipated)) > 0.2
            _, g = m.loss_and_grad(x, y, fl, fm)
            fd = finite_diff_grad(lambda: m.loss(x, y, fl, fm), m.params)
            for k in m.params:
                worst = max(worst, max_rel_error(g[k], fd[k]))
            checked += 1
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-4 and elapsed < 60
    assert record(1, "gradient suite", ok, f"{checked} models over 20 seeds, max rel err {worst:.2e} (< 1e-4), {elapsed:.1f}s (< 60s)")


# 2 ------------------------------------------------------------------------------


def test_metric_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst, tables = 0.0, 0
    while tables < 100:
        t = random_table(rng, n=int(rng.integers(8, 51)), num_classes=int(rng.integers(2, 5)), steps=2)
        s, lab, vid, C = t.scores.tolist(), t.labels.tolist(), t.video.tolist(), t.num_classes
        with warnings.catch_warnings(), np.errstate(all="ignore"):
            warnings.simplefilter("ignore")
            m = per_frame_map(t)
            dec = decile_cap(t)
            try:
                ant = anticipation_report(t)
                want_ant = [brute_anticipation(t.anticipated.tolist(), lab, vid, C, 2, cal) for cal in (False, True)]
            except (ZeroDivisionError, ValueError, ArithmeticError):
                continue  # an offset with no positives at all is undefined on both sides
        diffs = [abs(m["map"] - brute_class_means(s, lab, C, False)), abs(m["mcap"] - brute_class_means(s, lab, C, True))]
        for g, w in zip(dec, brute_deciles(s, lab, vid, C)):
            assert np.isnan(g) == np.isnan(w)
            if not np.isnan(g):
                diffs.append(abs(g - w))
        diffs += [abs(a - b) for a, b in zip(ant["map"], want_ant[0])]
        diffs += [abs(a - b) for a, b in zip(ant["mcap"], want_ant[1])]
        worst = max(worst, max(diffs))
        tables += 1
    # w = 1: as many negatives as positives
    balanced = 0
    for _ in range(100):
        n = 2 * int(rng.integers(1, 25))
        pos = rng.permutation(np.r_[np.ones(n // 2), np.zeros(n // 2)]).astype(bool)
        sc = np.round(rng.random(n), 1)
        cap, ap = calibrated_ap(sc, pos), average_precision(sc, pos)
        balanced += cap == ap and abs(ap - brute_ap(sc, pos)) <= 1e-12
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and balanced == 100 and elapsed < 10
    assert record(2, "metric oracle", ok, f"{tables} tables, max |diff| {worst:.1e} (<= 1e-12), cAP==AP at w=1 in {balanced}/100, {elapsed:.1f}s (< 10s)")


# 3 ------------------------------------------------------------------------------


def test_causality():
    rng = np.random.default_rng(3)
    failures = []
    kinds = ("trn", "lstm", "ed", "framewise")
    for kind in kinds:
        m = build_model(TrnConfig(feature_dim=4, num_actions=3, hidden_dim=6, decoder_steps=3, score_embed_dim=4, model=kind), seed=7)
        for _ in range(10):
            frames = rng.normal(size=(int(rng.integers(5, 30)), 4))
            full = m.stream(frames)
            for k in range(1, len(frames)):
                part = m.stream(frames[:k])
                if not (np.array_equal(part.current, full.current[:k]) and np.array_equal(part.anticipated, full.anticipated[:k])):
                    failures.append((kind, k))
    assert record(3, "causality", not failures, f"online models {', '.join(kinds)}; 10 sequences each, every prefix bit-exact; mismatches {len(failures)}")


# 4 ------------------------------------------------------------------------------


def test_synthetic_comparative_claim(benchmark):
    cfg, train_ds, test_ds = benchmark
    t0 = time.perf_counter()
    means = {}
    for kind in ("trn", "lstm", "rnn-offline"):
        scores = []
        for seed in BENCH_SEEDS:
            run = load_config(overrides={**BENCH, "model": kind, "seed": seed})
            model, _ = train_model(run, train_ds)
            scores.append(per_frame_map(evaluate(model, test_ds))["map"])
        means[kind] = float(np.mean(scores))
    elapsed = time.perf_counter() - t0
    gap = 100 * (means["trn"] - means["lstm"])
    ok = gap >= 2.0 and means["rnn-offline"] >= means["lstm"] and elapsed < 600
    detail = (
        f"mAP trn {100 * means['trn']:.2f}, lstm {100 * means['lstm']:.2f}, rnn-offline {100 * means['rnn-offline']:.2f}; "
        f"trn-lstm {gap:+.2f} pts (>= 2), offline>=lstm {means['rnn-offline'] >= means['lstm']}, {elapsed:.0f}s (< 600s)"
    )
    assert record(4, "synthetic comparative claim", ok, detail)


# 5 ------------------------------------------------------------------------------


def test_ablation_harness(benchmark, tmp_path):
    cfg, train_ds, test_ds = benchmark
    save_dataset(train_ds, tmp_path / "train.oads")
    save_dataset(test_ds, tmp_path / "test.oads")
    run = load_config(overrides={**BENCH, "epochs": ABLATION_EPOCHS})
    table = cmd_ablate(run, tmp_path / "train.oads", tmp_path / "test.oads", ABLATION_STEPS, ABLATION_SEEDS, tmp_path / "ablation.txt")
    ant = [table["anticipation_map"][ld] for ld in ABLATION_STEPS]
    det = [table["detection_map"][ld] for ld in ABLATION_STEPS]
    ok = all(b <= a for a, b in zip(ant, ant[1:])) and len(table["cells"]) == len(ABLATION_STEPS) * len(ABLATION_SEEDS)
    detail = (
        f"ld {ABLATION_STEPS}: anticipation mAP {' '.join(f'{100 * v:.2f}' for v in ant)} (non-increasing); "
        f"detection mAP {' '.join(f'{100 * v:.2f}' for v in det)} (not asserted)"
    )
    assert record(5, "ablation harness", ok, detail)


# 6 ------------------------------------------------------------------------------

# One video, one action class: 5 bg, instance A (10), 5 bg, instance B (10), 5 bg.
# Negative scores rise with row order; positives in decile j score 0.1j + 0.04 (A)
# and 0.1j + 0.06 (B), so later deciles outrank more negatives.
RAMP_NEGATIVES_ABOVE = [(14, 14), (12, 12), (11, 10), (9, 9), (7, 7), (6, 5), (4, 4), (2, 2), (1, 0), (0, 0)]


def ramp_table():
    labels = [0] * 5 + [1] * 10 + [0] * 5 + [1] * 10 + [0] * 5
    s = np.zeros(len(labels))
    neg = [r for r, l in enumerate(labels) if l == 0]
    s[neg] = 0.01 + 0.06 * np.arange(len(neg))
    s[5:15] = 0.1 * np.arange(10) + 0.04
    s[20:30] = 0.1 * np.arange(10) + 0.06
    return make_table(labels, np.stack([1.0 - s, s], axis=1))


def ramp_hand_values():
    w = 15 / 2
    return [(1 / (1 + nb / w) + 2 / (2 + na / w)) / 2 for na, nb in RAMP_NEGATIVES_ABOVE]


def test_decile_protocol(benchmark):
    got = decile_cap(ramp_table())
    want = ramp_hand_values()
    err = max(abs(g - h) for g, h in zip(got, want))
    cfg, _, test_ds = benchmark
    small = type(test_ds)(test_ds.videos[:2], test_ds.num_actions, test_ds.feature_dim)
    lengths = []
    for kind in ("trn", "lstm", "ed", "framewise", "rnn-offline"):
        m = build_model(load_config(overrides={**BENCH, "model": kind}).trn_config(), seed=0)
        lengths.append(len(decile_cap(evaluate(m, small))))
    ok = len(got) == 10 and got[9] > got[0] and err <= 1e-9 and lengths == [10] * 5
    assert record(6, "decile protocol", ok, f"10 values for each of 5 models {lengths == [10] * 5}; ramp first {got[0]:.6f} < last {got[9]:.6f}; max |diff| vs hand {err:.1e} (<= 1e-9)")


# 7 ------------------------------------------------------------------------------


def test_determinism_and_formats(tmp_path):
    tiny = ["--set", "num_videos=3", "--set", "frames_per_video=40", "--set", "num_actions=2", "--set", "feature_dim=3",
            "--set", "hidden_dim=5", "--set", "decoder_steps=2", "--set", "sequence_len=10", "--set", "epochs=2"]
    checks = {}
    for tag in ("a", "b"):
        assert main(["generate", "--out", str(tmp_path / f"d{tag}"), "--seed", "9", *tiny]) == 0
        assert main(["train", "--data", str(tmp_path / "da"), "--out", str(tmp_path / f"m{tag}"), "--seed", "9", *tiny]) == 0
        assert main(["eval", "--checkpoint", str(tmp_path / f"m{tag}"), "--data", str(tmp_path / "da"),
                     "--deciles", "--anticipation", "--out", str(tmp_path / f"r{tag}")]) == 0
    same = lambda name: (tmp_path / f"{name}a").read_bytes() == (tmp_path / f"{name}b").read_bytes()
    checks["datasets identical"] = same("d")
    checks["checkpoints identical"] = same("m")
    checks["reports identical"] = (tmp_path / "ra.kv").read_bytes() == (tmp_path / "rb.kv").read_bytes() and (
        tmp_path / "ra.txt").read_bytes() == (tmp_path / "rb.txt").read_bytes()
    data, ckpt = (tmp_path / "da").read_bytes(), (tmp_path / "ma").read_bytes()
    checks["OADS round trip"] = dataset_to_bytes(dataset_from_bytes(data)) == data
    checks["TRN1 round trip"] = checkpoint_to_bytes(checkpoint_from_bytes(ckpt)) == ckpt

    rng = np.random.default_rng(7)
    crashes = 0
    for buf, load in ((data, dataset_from_bytes), (ckpt, checkpoint_from_bytes)):
        corrupt = [buf[:cut] for cut in range(0, len(buf), max(1, len(buf) // 200))]
        corrupt += [b"XXXX" + buf[4:], buf + b"\x01"]
        for _ in range(200):
            bad = bytearray(buf)
            bad[int(rng.integers(0, len(buf)))] ^= int(rng.integers(1, 256))
            corrupt.append(bytes(bad))
        for bad in corrupt:
            try:
                load(bad)
            except FormatError:
                pass
            except Exception:  # anything else counts as a crash
                crashes += 1
    checks["corruption -> format error"] = crashes == 0
    ok = all(checks.values())
    assert record(7, "determinism and formats", ok, ", ".join(f"{k} {v}" for k, v in checks.items()))
