"""Command line front end: generate, train, eval, ablate, gradcheck.

Exit codes: 0 success, 1 usage or config error, 2 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .checkpoint import checkpoint_from_bytes, checkpoint_to_bytes, load_checkpoint, save_checkpoint
from .config import RunConfig, load_config
from .data import FormatError, StreamDataset, generate, load_dataset, save_dataset
from .metrics import MetricReport, build_report
from .models import MODEL_KINDS, TrnConfig, build_model
from .models.config import ConfigError
from .numerics import NumericError, finite_diff_grad, max_rel_error
from .rng import stream
from .training import evaluate, train

GRADCHECK_TOL = 1e-4


class UsageError(Exception):
    pass


# --- subcommands as plain functions --------------------------------------------


def dataset_summary(ds: StreamDataset) -> str:
    hist = ds.class_histogram()
    lines = [f"videos {len(ds.videos)}", f"frames {ds.num_frames}"]
    lines += [f"class {c} {int(n)}" for c, n in enumerate(hist)]
    return "\n".join(lines) + "\n"


def cmd_generate(cfg: RunConfig, out_path) -> StreamDataset:
    ds = generate(cfg.generator_config())
    save_dataset(ds, out_path)
    return ds


def train_model(cfg: RunConfig, dataset: StreamDataset, log_lines: list[str] | None = None):
    tcfg = cfg.trn_config(feature_dim=dataset.feature_dim, num_actions=dataset.num_actions)
    model = build_model(tcfg, seed=cfg.seed)

    def on_epoch(epoch, loss):
        line = f"epoch {epoch} loss {loss:.6f}"
        print(line, flush=True)
        if log_lines is not None:
            log_lines.append(line)

    trace = train(model, dataset, cfg.train_config(), on_epoch)
    return model, trace


def cmd_train(cfg: RunConfig, dataset_path, out_checkpoint, log_path=None) -> list[float]:
    dataset = load_dataset(dataset_path)
    if cfg.feature_dim != dataset.feature_dim:
        raise ConfigError(f"config feature_dim={cfg.feature_dim} but dataset has D={dataset.feature_dim}")
    if cfg.num_actions != dataset.num_actions:
        raise ConfigError(f"config num_actions={cfg.num_actions} but dataset has K={dataset.num_actions}")
    lines: list[str] = []
    model, trace = train_model(cfg, dataset, lines)
    save_checkpoint(model, out_checkpoint)
    log_path = log_path or cfg.log or str(out_checkpoint) + ".log"
    Path(log_path).write_text("\n".join(lines) + ("\n" if lines else ""))
    return trace


def eval_model(model, dataset: StreamDataset, deciles=False, anticipation=False) -> MetricReport:
    if model.config.feature_dim != dataset.feature_dim or model.config.num_actions != dataset.num_actions:
        raise ConfigError(
            f"checkpoint expects D={model.config.feature_dim}, K={model.config.num_actions}; "
            f"dataset has D={dataset.feature_dim}, K={dataset.num_actions}"
        )
    return build_report(evaluate(model, dataset), deciles=deciles, anticipation=anticipation)


def cmd_eval(checkpoint_path, dataset_path, deciles=False, anticipation=False, out=None) -> MetricReport:
    report = eval_model(load_checkpoint(checkpoint_path), load_dataset(dataset_path), deciles, anticipation)
    if out:
        Path(str(out) + ".txt").write_text(report.to_text())
        Path(str(out) + ".kv").write_text(report.to_kv())
    return report


def ablation_cell(cfg: RunConfig, train_ds, test_ds, ld: int, seed: int) -> MetricReport:
    """Train TRN with ``ld`` decoder steps and evaluate through a checkpoint round trip,
    exactly as train followed by eval would."""
    cell_cfg = load_config(overrides={**asdict(cfg), "model": "trn", "decoder_steps": ld, "seed": seed})
    model, _ = train_model(cell_cfg, train_ds)
    model = checkpoint_from_bytes(checkpoint_to_bytes(model))
    return eval_model(model, test_ds, anticipation=True)


def cmd_ablate(cfg: RunConfig, train_path, test_path, lds, seeds, out=None) -> dict:
    if not lds or not seeds:
        raise UsageError("ablation needs at least one decoder-step value and one seed")
    train_ds, test_ds = load_dataset(train_path), load_dataset(test_path)
    table = {"detection_map": {}, "anticipation_map": {}, "cells": {}}
    for ld in lds:
        det, ant = [], []
        for seed in seeds:
            rep = ablation_cell(cfg, train_ds, test_ds, ld, seed)
            table["cells"][(ld, seed)] = rep
            det.append(rep.map)
            ant.append(rep.anticipation_avg_map)
        table["detection_map"][ld] = float(np.mean(det))
        table["anticipation_map"][ld] = float(np.mean(ant))
    text = format_ablation(table, lds)
    print(text, end="")
    if out:
        Path(out).write_text(text)
    return table


def format_ablation(table: dict, lds) -> str:
    head = ["task"] + [f"ld={ld}" for ld in lds]
    r1 = ["online action detection mAP"] + [f"{100 * table['detection_map'][ld]:.2f}" for ld in lds]
    r2 = ["action anticipation mAP"] + [f"{100 * table['anticipation_map'][ld]:.2f}" for ld in lds]
    rows = [head, r1, r2]
    widths = [max(len(r[k]) for r in rows) for k in range(len(head))]
    return "\n".join("  ".join(c.ljust(w) if k == 0 else c.rjust(w) for k, (c, w) in enumerate(zip(r, widths))).rstrip() for r in rows) + "\n"


GRADCHECK_KINDS = ("trn", "lstm", "ed", "framewise", "rnn-offline")


def cmd_gradcheck(cfg: RunConfig, seed: int, corrupt: str | None = None) -> dict:
    """Analytic vs central-difference gradients on tiny random instances.

    ``corrupt`` names a parameter block whose analytic gradient is nudged,
    as a negative control.
    """
    rng = stream(seed, "init", 99)
    results = {}
    for kind in GRADCHECK_KINDS:
        tcfg = TrnConfig(feature_dim=3, num_actions=2, hidden_dim=4, decoder_steps=2, score_embed_dim=3, alpha=cfg.alpha, model=kind)
        model = build_model(tcfg, seed=seed)
        for k in model.params:
            model.params[k] = model.params[k] + rng.normal(0.0, 0.3, model.params[k].shape)
        B, T, L = 2, 4, model.num_anticipated
        x = rng.normal(size=(B, T, model.input_dim))
        y = rng.integers(0, tcfg.num_classes, (B, T))
        fl = rng.integers(0, tcfg.num_classes, (B, T, L))
        fm = rng.random((B, T, L)) > 0.2
        _, grads = model.loss_and_grad(x, y, fl, fm)
        if corrupt and corrupt in grads:
            grads[corrupt] = grads[corrupt] + 1e-3
        fd = finite_diff_grad(lambda: model.loss(x, y, fl, fm), model.params)
        for name in model.params:
            results[(kind, name)] = max_rel_error(grads[name], fd[name])
    return results


def format_gradcheck(results: dict) -> str:
    lines = [f"{kind:12s} {name:26s} {err:.3e} {'ok' if err < GRADCHECK_TOL else 'FAIL'}" for (kind, name), err in results.items()]
    worst = max(results.values())
    lines.append(f"max relative error {worst:.3e} ({'pass' if worst < GRADCHECK_TOL else 'FAIL'})")
    return "\n".join(lines) + "\n"


# --- argument parsing ----------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="trn", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="key = value config file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
        sp.add_argument("--seed", type=int)

    g = sub.add_parser("generate", help="write a synthetic OADS dataset")
    common(g)
    g.add_argument("--out", required=True)

    t = sub.add_parser("train", help="train a model and write a TRN1 checkpoint")
    common(t)
    t.add_argument("--data", help="training dataset (defaults to train_data)")
    t.add_argument("--model", choices=MODEL_KINDS)
    t.add_argument("--ld", type=int, help="decoder steps")
    t.add_argument("--out", required=True)
    t.add_argument("--log", help="loss trace file (defaults to <out>.log)")

    e = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--deciles", action="store_true")
    e.add_argument("--anticipation", action="store_true")
    e.add_argument("--out", help="report prefix; writes <out>.txt and <out>.kv")

    a = sub.add_parser("ablate", help="decoder-step ablation")
    common(a)
    a.add_argument("--data", help="training dataset (defaults to train_data)")
    a.add_argument("--test-data", help="evaluation dataset (defaults to test_data)")
    a.add_argument("--ld", type=_int_list, default=[4, 6, 8, 10])
    a.add_argument("--seeds", type=_int_list, default=None, help="comma-separated seeds (defaults to --seed)")
    a.add_argument("--out")

    gc = sub.add_parser("gradcheck", help="compare analytic and finite-difference gradients")
    common(gc)
    gc.add_argument("--corrupt", help=argparse.SUPPRESS)
    return p


def _run_config(args) -> RunConfig:
    over: dict = {}
    for item in args.set:
        k, sep, v = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        over[k.strip()] = v
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    if getattr(args, "model", None):
        over["model"] = args.model
    ld = getattr(args, "ld", None)
    if isinstance(ld, int):
        over["decoder_steps"] = ld
    return load_config(args.config, over)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "generate":
            ds = cmd_generate(_run_config(args), args.out)
            print(dataset_summary(ds), end="")
        elif args.command == "train":
            cfg = _run_config(args)
            data = args.data or cfg.train_data
            if not data:
                raise UsageError("train needs --data or train_data in the config")
            cmd_train(cfg, data, args.out, args.log)
        elif args.command == "eval":
            rep = cmd_eval(args.checkpoint, args.data, args.deciles, args.anticipation, args.out)
            print(rep.to_text(), end="")
        elif args.command == "ablate":
            cfg = _run_config(args)
            tr, te = args.data or cfg.train_data, args.test_data or cfg.test_data
            if not tr or not te:
                raise UsageError("ablate needs --data and --test-data (or train_data/test_data in the config)")
            seeds = args.seeds if args.seeds is not None else [cfg.seed]
            cmd_ablate(cfg, tr, te, args.ld, seeds, args.out)
        elif args.command == "gradcheck":
            cfg = _run_config(args)
            res = cmd_gradcheck(cfg, cfg.seed, args.corrupt)
            print(format_gradcheck(res), end="")
            if max(res.values()) >= GRADCHECK_TOL:
                return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    except (UsageError, ConfigError, FormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
