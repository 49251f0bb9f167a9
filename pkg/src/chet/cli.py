"""Command line: generate, train, evaluate, verify, bench.

Exit codes: 0 success, 1 verification failure, 2 usage/config/IO error,
3 training divergence. The log level comes from ``CHET_LOG_LEVEL``.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any

import numpy as np

from .cograph import CoGraph
from .config import ConfigError, RunConfig, TrainConfig, from_dict, load_run_config, to_dict, train_config
from .ehrdata import CodeVocab, DataError, dump_dataset, load_dataset, remap
from .model import Chet, ChetParams
from .synthgen import SynthConfig, SynthConfigError, describe, generate
from .train import TrainingDiverged, build_report, prepare, run_experiment
from .verify import BENCH_HEADER, bench_row, verify

log = logging.getLogger("chet")

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _writable(path: str | None) -> None:
    if path is None:
        return
    parent = Path(path).resolve().parent
    if not parent.is_dir():
        raise UsageError(f"output directory does not exist: {parent}")


def _readable(path: str) -> None:
    if not Path(path).is_file():
        raise UsageError(f"file not found: {path}")


def _write_json(obj: Any, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def resolve_train_config(rc: RunConfig, args: argparse.Namespace) -> TrainConfig:
    overrides = {k: getattr(args, k) for k in ("task", "ablation", "seed", "epochs") if getattr(args, k, None) is not None}
    data = {**rc.train, **overrides}
    names = set(TrainConfig.__dataclass_fields__)
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown TrainConfig key(s): {sorted(unknown)}")
    return train_config(rc.preset, **data)


def save_model(path: str, model: Chet, vocab: CodeVocab, cfg: TrainConfig) -> None:
    arrays = {f"param/{k}": v for k, v in model.params.snapshot().items()}
    meta = {"variant": model.variant, "config": to_dict(cfg), "delta": model.graph.delta}
    with open(path, "wb") as fh:
        np.savez(fh, A=model.graph.A, codes=np.array(vocab.codes), meta=np.array(json.dumps(meta)), **arrays)


def load_model(path: str) -> tuple[Chet, CodeVocab, TrainConfig]:
    try:
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            arrays = {k.split("/", 1)[1]: z[k] for k in z.files if k.startswith("param/")}
            A, codes = z["A"], tuple(str(c) for c in z["codes"])
    except (OSError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot read model {path}: {exc}") from exc
    cfg = from_dict(TrainConfig, meta["config"])
    vocab = CodeVocab(codes)
    params = ChetParams.init(meta["variant"], vocab.d, output_size_for(cfg.task, vocab.d), cfg)
    params.load(arrays)
    return Chet(CoGraph(A, meta["delta"]), params, cfg.pool_all), vocab, cfg


def output_size_for(task: str, d: int) -> int:
    return d if task == "diagnosis" else 1


def cmd_generate(args) -> int:
    rc = load_run_config(args.config)
    _writable(args.out)
    synth = dict(rc.synth)
    if args.seed is not None:
        synth["seed"] = args.seed
    try:
        cfg = from_dict(SynthConfig, synth)
    except SynthConfigError as exc:
        raise ConfigError(str(exc)) from exc
    ds = generate(cfg)
    dump_dataset(ds, args.out)
    print(json.dumps(describe(ds), sort_keys=True))
    return EXIT_OK


def cmd_train(args) -> int:
    rc = load_run_config(args.config)
    cfg = resolve_train_config(rc, args)
    _readable(args.data)
    _writable(args.out_model)
    _writable(args.report)
    ds, _ = load_dataset(args.data)
    try:
        exp = run_experiment(ds, cfg)
    except TrainingDiverged as exc:
        print(f"training diverged at epoch {exc.epoch}; last finite loss {exc.last_finite_loss}", file=sys.stderr)
        return EXIT_DIVERGED
    if args.out_model:
        save_model(args.out_model, exp.result.model, ds.vocab, cfg)
    if args.report:
        _write_json(exp.report, args.report)
    print(json.dumps({"variant": exp.report["variant"], "metrics": exp.report["metrics"]}, sort_keys=True))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    _readable(args.model)
    _readable(args.data)
    _writable(args.report)
    model, vocab, cfg = load_model(args.model)
    ds, _ = load_dataset(args.data)
    ds, dropped = remap(ds, vocab)
    if dropped:
        log.warning("dropped %d code occurrence(s) unknown to the model", dropped)
    report = build_report(model, prepare(ds, model.graph, cfg), cfg, model.variant)
    if args.report:
        _write_json(report, args.report)
    print(json.dumps(report["metrics"], sort_keys=True))
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.trials < 0 or args.max_d < 2:
        raise UsageError("--trials must be >= 0 and --max-d >= 2")
    if args.trials == 0:
        log.warning("no trials requested; vacuous pass")
    rep = verify(args.trials, args.max_d, seed=args.seed, fault=args.inject_fault)
    print(f"trials {rep.trials}")
    print(f"subgraph max deviation {rep.max_subgraph_dev:.3e}")
    print(f"aggregate max relative deviation {rep.max_aggregate_dev:.3e}")
    print(f"dense d*d allocations on optimized path {rep.dense_allocs}")
    if not rep.ok:
        print(f"FAIL: instance seeds {rep.failures}")
        return EXIT_VERIFY
    print("PASS")
    return EXIT_OK


def cmd_bench(args) -> int:
    _writable(args.out)
    rows = [bench_row(d, args.s, seed=args.seed) for d in args.d]
    fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.DictWriter(fh, fieldnames=BENCH_HEADER)
        w.writeheader()
        w.writerows(rows)
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def _positive_ints(text: str) -> list[int]:
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("expected comma-separated positive integers")
    return vals


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chet", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic JSONL dataset")
    g.add_argument("--config")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="split, build graph, train, evaluate on test")
    t.add_argument("--config")
    t.add_argument("--data", required=True)
    t.add_argument("--task", choices=("diagnosis", "heart_failure"))
    t.add_argument("--ablation", choices=("full", "no_dynamic", "no_transition"))
    t.add_argument("--seed", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--out-model")
    t.add_argument("--report")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="score a saved model on a dataset")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--report")
    e.set_defaults(func=cmd_evaluate)

    v = sub.add_parser("verify", help="check dense vs optimized aggregation")
    v.add_argument("--trials", type=int, default=200)
    v.add_argument("--max-d", type=int, default=50)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="peak intermediate bytes and time of both aggregation routes")
    b.add_argument("--d", type=_positive_ints, default=[200, 400, 800])
    b.add_argument("--s", type=int, default=16)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("CHET_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(
        level=level if isinstance(logging.getLevelName(level), int) else "WARNING",
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError, DataError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
