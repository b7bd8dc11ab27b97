"""Command line front end: bundled demos, training, queries, refutation."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from reallogic import demos
from reallogic.assemble import load_theory
from reallogic.nn import ParamStore
from reallogic.training import (
    RefutationConfig, TrainConfig, learn, query, reason_refute, write_metrics,
)

TRAIN_KEYS = {"epochs": int, "batch": int, "lr": float, "seed": int,
              "reg": str, "lam": float, "log_every": int}
FUZZY_KEYS = ("not", "and", "or", "implies", "forall", "exists", "agg",
              "eq_alpha")


def read_config(path):
    """Flat ``key = value`` lines; blank lines and # comments are skipped.

    Keys are either optimizer settings (epochs, batch, lr, seed, reg,
    lam, log_every) or operator tags (and, or, implies, not, forall,
    exists, agg, eq_alpha) in the same form the theory files use.
    """
    train, tags = {}, {}
    for ln, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise SystemExit(f"{path}:{ln}: expected key = value")
        key, val = key.strip(), val.strip()
        if key in TRAIN_KEYS:
            try:
                train[key] = TRAIN_KEYS[key](val)
            except ValueError:
                raise SystemExit(f"{path}:{ln}: bad value for {key!r}")
        elif key in FUZZY_KEYS:
            tags[key] = val
        else:
            raise SystemExit(f"{path}:{ln}: unknown config key {key!r}")
    return train, tags


def _report_checks(report) -> int:
    bad = 0
    for metric, ok, got, op, bound in report:
        word = "ok" if ok else "FAIL"
        print(f"self-check {word}: {metric} = {got:.4f} (want {op} {bound})")
        bad += not ok
    return 1 if bad else 0


def cmd_demo(args) -> int:
    train_kv, tags = read_config(args.config) if args.config else ({}, {})
    if args.epochs is not None:
        train_kv["epochs"] = args.epochs
    train = None
    if train_kv:
        train = replace(demos.default_train(args.id, args.seed), **train_kv)
    if args.runs > 1:
        summary = demos.run_many(args.id, args.runs, seed=args.seed,
                                 train=train, tags=tags or None)
        for k in sorted(summary):
            s = summary[k]
            print(f"{k}: {s['mean']:.4f} +/- {s['ci95']:.4f} "
                  f"(n={args.runs})")
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            (out / "summary.json").write_text(
                json.dumps(summary, indent=2, sort_keys=True) + "\n")
        if args.self_check:
            final = {k: s["mean"] for k, s in summary.items()}
            fake = demos.DemoResult(args.id, args.seed, [], final, {}, None)
            return _report_checks(demos.self_check(fake))
        return 0
    result = demos.run_demo(args.id, seed=args.seed, train=train,
                            out=args.out, tags=tags or None)
    for k in sorted(result.final):
        print(f"{k}: {result.final[k]:.4f}")
    if args.self_check:
        return _report_checks(demos.self_check(result))
    return 0


def _load_kb(args):
    th = load_theory(args.kb, seed=args.seed)
    tags = getattr(args, "tags", None) or {}
    for k, v in tags.items():
        th.env.cfg = th.env.cfg.with_tag(k, v)
    return th


def cmd_train(args) -> int:
    train_kv, tags = read_config(args.config) if args.config else ({}, {})
    args.tags = tags
    th = _load_kb(args)
    train_kv.setdefault("seed", args.seed)
    train_kv.setdefault("epochs", args.epochs)
    th, recs = learn(th, TrainConfig(**train_kv))
    print(f"Sat = {recs[-1]['sat']:.4f} after {train_kv['epochs']} epochs")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_metrics(recs, jsonl_path=out / "metrics.jsonl",
                      csv_path=out / "metrics.csv")
        th.store.save(out / "params.bin")
        print(f"wrote {out / 'metrics.jsonl'}, {out / 'metrics.csv'}, "
              f"{out / 'params.bin'}")
    return 0


def cmd_query(args) -> int:
    th = _load_kb(args)
    if args.params:
        loaded = ParamStore.load(args.params)
        for n in loaded.names():
            th.store.get(n).data[...] = loaded.get(n).data
    res = query(th, "truth", args.formula,
                forall_p=args.forall_p, exists_p=args.exists_p)
    if res.values.ndim == 0:
        print(f"{float(res.values):.6f}")
    else:
        print("axes: " + ", ".join(res.vars))
        print(np.array2string(res.values, precision=6))
    return 0


def cmd_refute(args) -> int:
    rcfg = RefutationConfig(q=args.q, epochs=args.epochs,
                            restarts=args.restarts)
    rr = reason_refute(lambda s: load_theory(args.kb, seed=args.seed + s),
                       args.formula, rcfg)
    print(rr)
    if rr.counterexample:
        print("counterexample:")
        for n in sorted(rr.counterexample):
            v = np.asarray(rr.counterexample[n])
            print(f"  {n} = {np.array2string(v, precision=4)}")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="rl",
        description="Differentiable first-order theories: demos, "
                    "training, querying, and refutation search.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    d = sub.add_parser("demo", help="run a bundled demonstration")
    d.add_argument("id", choices=demos.DEMO_IDS)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--runs", type=int, default=1,
                   help="independent seeds run in parallel; prints "
                        "mean +/- 95%% CI per metric")
    d.add_argument("--epochs", type=int, help="override training epochs")
    d.add_argument("--config", help="key = value override file")
    d.add_argument("--out", help="directory for metrics, params, artifacts")
    d.add_argument("--self-check", action="store_true",
                   help="compare final metrics against the demo's "
                        "published thresholds; nonzero exit on miss")
    d.set_defaults(fn=cmd_demo)

    t = sub.add_parser("train", help="maximize satisfiability of a theory")
    t.add_argument("--kb", required=True, help="theory source file")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--epochs", type=int, default=1000)
    t.add_argument("--config", help="key = value override file")
    t.add_argument("--out", help="directory for metrics and params")
    t.set_defaults(fn=cmd_train)

    q = sub.add_parser("query", help="evaluate a closed formula's truth")
    q.add_argument("--kb", required=True)
    q.add_argument("--formula", required=True)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--params", help="params.bin from an earlier train run")
    q.add_argument("--forall-p", type=float)
    q.add_argument("--exists-p", type=float)
    q.set_defaults(fn=cmd_query)

    r = sub.add_parser("refute", help="search for a counterexample "
                                      "grounding of a formula")
    r.add_argument("--kb", required=True)
    r.add_argument("--formula", required=True)
    r.add_argument("--q", type=float, default=0.95,
                   help="satisfiability threshold the counterexample "
                        "must keep")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--epochs", type=int, default=2000)
    r.add_argument("--restarts", type=int, default=1)
    r.set_defaults(fn=cmd_refute)

    args = ap.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
