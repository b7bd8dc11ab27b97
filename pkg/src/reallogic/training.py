"""Satisfiability, the learning loop, queries, and reasoning by refutation."""

from __future__ import annotations

import json
import math
from contextlib import nullcontext
from dataclasses import dataclass, field, replace

import numpy as np

from reallogic.fuzzy import aggregate
from reallogic.logic import (
    Bin, Not, Quant, free_vars, ground_formula, ground_term,
)
from reallogic.nn import adam_step, backward
from reallogic import tensor as T
from reallogic.tensor import Tensor


class DivergenceError(RuntimeError):
    pass


@dataclass
class Theory:
    """A knowledge base: closed axioms over a grounded environment."""
    axioms: tuple
    env: "GroundingEnv"
    doc: object = None

    def __post_init__(self):
        if not self.axioms:
            raise ValueError("theory has no axioms")
        for ax in self.axioms:
            loose = free_vars(ax.formula)
            if loose:
                raise ValueError(f"axiom {ax.label or ''!s} is not closed: "
                                 f"free {', '.join(loose)}")

    @property
    def cfg(self):
        return self.env.cfg

    @property
    def store(self):
        return self.env.store

    @property
    def sig(self):
        return self.env.sig


def axiom_truth(theory: Theory, axiom, forall_p=None, exists_p=None) -> Tensor:
    """Ground one axiom; its own p annotations win over the overrides."""
    fp = axiom.forall_p if axiom.forall_p is not None else forall_p
    ep = axiom.exists_p if axiom.exists_p is not None else exists_p
    return ground_formula(theory.env, axiom.formula,
                          forall_p=fp, exists_p=ep).tensor


def satisfiability(theory: Theory, forall_p=None, exists_p=None) -> Tensor:
    """Aggregate all axiom truths with the theory's formula aggregator."""
    truths = [axiom_truth(theory, ax, forall_p, exists_p)
              for ax in theory.axioms]
    return aggregate(theory.cfg.sat_agg, T.stack(truths), axes=None)


# -- training ----------------------------------------------------------------


@dataclass
class TrainConfig:
    epochs: int = 100
    batch: int = 64
    lr: float = 0.001
    seed: int = 0
    reg: str = "none"             # none | l1 | l2
    lam: float = 0.0
    forall_schedule: tuple = None  # ((epoch, p), ...) or ("linear", p0, p1)
    exists_schedule: tuple = None
    log_every: int = 1

    def __post_init__(self):
        if self.epochs < 1 or self.batch < 1 or self.lr <= 0:
            raise ValueError("epochs, batch, and lr must be positive")
        if self.reg not in ("none", "l1", "l2"):
            raise ValueError(f"unknown regularizer {self.reg!r}")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        for s in (self.forall_schedule, self.exists_schedule):
            _check_schedule(s)


def _check_schedule(s) -> None:
    if s is None:
        return
    if s and s[0] == "linear":
        if len(s) != 3:
            raise ValueError("linear schedule needs (\"linear\", p0, p1)")
        return
    epochs = [e for e, _ in s]
    if epochs != sorted(set(epochs)):
        raise ValueError("schedule epochs must be strictly increasing")


def schedule_value(schedule, epoch: int, total: int):
    """p for a 0-based epoch; None leaves the configured default."""
    if schedule is None:
        return None
    if schedule[0] == "linear":
        _, p0, p1 = schedule
        return float(p0) + (float(p1) - float(p0)) * epoch / max(total - 1, 1)
    value = None
    for e, p in schedule:
        if epoch >= e:
            value = float(p)
    return value


def regularizer(store, kind: str) -> Tensor:
    """L1/L2 penalty over every trainable slot."""
    total = Tensor(0.0)
    for name in store.names():
        t = store.get(name)
        sq = t * t if kind == "l2" else T.maximum(t, -t)
        total = total + T.reduce_sum(sq)
    return total


def _diag_partition(theory: Theory, names) -> list:
    """Group data-bound variables that co-occur under one Diag group, so
    one index draw keeps their tuples aligned."""
    parent = {n: n for n in names}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for ax in theory.axioms:
        stack = [ax.formula]
        while stack:
            f = stack.pop()
            if isinstance(f, Quant):
                for g in f.groups:
                    members = [v for v in g if v in parent]
                    for a, b in zip(members, members[1:]):
                        parent[find(a)] = find(b)
                stack.append(f.body)
            elif isinstance(f, (Not,)):
                stack.append(f.body)
            elif isinstance(f, Bin):
                stack.extend((f.lhs, f.rhs))
    groups = {}
    for n in names:
        groups.setdefault(find(n), []).append(n)
    return list(groups.values())


def _loss(theory: Theory, train: TrainConfig, fp, ep) -> Tensor:
    loss = 1.0 - satisfiability(theory, fp, ep)
    if train.reg != "none" and train.lam > 0:
        loss = loss + train.lam * regularizer(theory.store, train.reg)
    return loss


def learn(theory: Theory, train: TrainConfig, data: dict = None,
          metrics: dict = None):
    """Maximize Sat by minibatch gradient ascent.

    ``data`` maps variable names to full instance arrays; each step
    rebinds them to a uniformly drawn batch (without replacement,
    Diag-linked variables share the draw). ``metrics`` maps names to
    callables on the theory, evaluated every ``log_every`` epochs.
    Returns (theory, records); records[0] is the pre-training state.
    """
    data = data or {}
    metrics = metrics or {}
    for name, arr in data.items():
        if len(arr) == 0:
            raise ValueError(f"dataset for {name!r} is empty")
    groups = _diag_partition(theory, data.keys())
    sizes = {}
    for g in groups:
        ns = {len(data[v]) for v in g}
        if len(ns) > 1:
            raise ValueError(f"diag-linked variables {g} have unequal sizes")
        sizes[tuple(g)] = ns.pop()
    steps = max((math.ceil(n / train.batch) for n in sizes.values()),
                default=1)
    rng = np.random.default_rng(train.seed)
    records = [_log(theory, train, data, metrics, 0)]
    for epoch in range(1, train.epochs + 1):
        fp = schedule_value(train.forall_schedule, epoch - 1, train.epochs)
        ep = schedule_value(train.exists_schedule, epoch - 1, train.epochs)
        theory.env.training = True
        try:
            for _ in range(steps):
                binds = {}
                for g in groups:
                    n = sizes[tuple(g)]
                    idx = rng.choice(n, size=min(train.batch, n),
                                     replace=False)
                    for v in g:
                        binds[v] = np.asarray(data[v])[idx]
                ctx = theory.env.bind(**binds) if binds else nullcontext()
                with ctx:
                    loss = _loss(theory, train, fp, ep)
                if not np.isfinite(loss.data):
                    raise DivergenceError(f"loss {loss.data} at epoch {epoch}")
                grads = backward(loss, theory.store)
                adam_step(theory.store, grads, lr=train.lr)
        finally:
            theory.env.training = False
        records.append(_log(theory, train, data, metrics, epoch, fp, ep))
    return theory, records


def _log(theory, train, data, metrics, epoch, fp=None, ep=None) -> dict:
    if epoch == 0:
        fp = schedule_value(train.forall_schedule, 0, train.epochs)
        ep = schedule_value(train.exists_schedule, 0, train.epochs)
    theory.env.training = False
    ctx = theory.env.bind(**{k: np.asarray(v) for k, v in data.items()}) \
        if data else nullcontext()
    with ctx:
        sat = satisfiability(theory, fp, ep)
        loss = 1.0 - sat
        if train.reg != "none" and train.lam > 0:
            loss = loss + train.lam * regularizer(theory.store, train.reg)
    rec = {"epoch": epoch, "sat": float(sat.data), "loss": float(loss.data)}
    due = epoch % train.log_every == 0 or epoch == train.epochs
    if metrics and due:
        for name, fn in metrics.items():
            rec[name] = float(fn(theory))
    return rec


# -- queries ----------------------------------------------------------------


@dataclass(frozen=True)
class QueryResult:
    kind: str
    values: np.ndarray
    vars: tuple


QUERY_KINDS = ("truth", "value", "generalization-truth",
               "generalization-value")


def query(theory: Theory, kind: str, expr, data: dict = None,
          forall_p=None, exists_p=None) -> QueryResult:
    """Evaluate a formula's truth or a term's value; never mutates θ.

    Generalization kinds rebind the given variables to unseen data
    first. Formula queries accept source text; term queries take an AST.
    """
    if kind not in QUERY_KINDS:
        raise ValueError(f"unknown query kind {kind!r}")
    truthy = kind.endswith("truth")
    if kind.startswith("generalization") and not data:
        raise ValueError("generalization queries need unseen data")
    if isinstance(expr, str):
        from reallogic.parser import parse_formula
        if not truthy:
            raise ValueError("value queries take a term AST")
        expr = parse_formula(expr, theory.sig)
    before = theory.store.state_hash()
    theory.env.training = False
    ctx = theory.env.bind(**data) if data else nullcontext()
    with ctx:
        if truthy:
            gv = ground_formula(theory.env, expr,
                                forall_p=forall_p, exists_p=exists_p)
            values = np.asarray(gv.tensor.data)
            if values.min() < -1e-9 or values.max() > 1 + 1e-9:
                raise RuntimeError("truth query outside [0, 1]")
            values = np.clip(values, 0.0, 1.0)
        else:
            gv = ground_term(theory.env, expr)
            values = np.asarray(gv.tensor.data)
    if theory.store.state_hash() != before:
        raise RuntimeError("query mutated the parameter store")
    return QueryResult(kind, values, gv.vars)


def truth_value(theory: Theory, formula, forall_p=None, exists_p=None,
                data: dict = None) -> float:
    """Scalar shortcut for closed-formula truth queries."""
    kind = "generalization-truth" if data else "truth"
    res = query(theory, kind, formula, data=data,
                forall_p=forall_p, exists_p=exists_p)
    return float(res.values)


# -- reasoning ----------------------------------------------------------------


@dataclass(frozen=True)
class ReasonRun:
    seed: int
    sat: float
    phi: float


@dataclass(frozen=True)
class ReasonResult:
    entailed: bool
    vacuous: bool    # no restart reached Sat >= q
    runs: tuple

    def __str__(self):
        verdict = "entailed" if self.entailed else "NOT entailed"
        if self.vacuous:
            verdict += " (vacuously: no satisfying grounding found)"
        lines = [verdict]
        lines += [f"  seed {r.seed}: Sat={r.sat:.4f} phi={r.phi:.4f}"
                  for r in self.runs]
        return "\n".join(lines)


def reason_query_after_learning(build, phi, q: float = 0.95,
                                restarts: int = 10, train: TrainConfig = None,
                                data: dict = None) -> ReasonResult:
    """Brave-consequence check: maximize Sat from several restarts and
    inspect the query on each optimum. Can miss counterexamples; that
    failure mode is what reason_refute repairs.

    ``build`` maps a seed to a fresh Theory (or is a Theory when
    restarts == 1).
    """
    if not callable(build):
        if restarts != 1:
            raise ValueError("multiple restarts need a theory builder")
        theory, build = build, lambda _: theory
    train = train or TrainConfig(epochs=1000, lr=0.05, batch=64)
    runs = []
    for i in range(restarts):
        th = build(i)
        learn(th, replace(train, seed=i), data=data)
        sat = float(satisfiability(th).data)
        gphi = truth_value(th, phi)
        runs.append(ReasonRun(i, sat, gphi))
    reached = [r for r in runs if r.sat >= q]
    entailed = all(r.phi >= q for r in reached)
    return ReasonResult(entailed, not reached, tuple(runs))


@dataclass(frozen=True)
class RefutationConfig:
    q: float = 0.95
    alpha: float = 0.05
    beta: float = 10.0
    c: float = 2.0        # hard-penalty constant; decision reference only
    restarts: int = 1
    epochs: int = 2000
    lr: float = 0.01

    def __post_init__(self):
        if not 0.5 < self.q < 1:
            raise ValueError("q must be in (0.5, 1)")
        if self.c <= 1:
            raise ValueError("c must be > 1")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be >= 0")
        if self.epochs < 1 or self.restarts < 1:
            raise ValueError("epochs and restarts must be positive")


def soft_penalty(sat: float, q: float, alpha: float, beta: float) -> float:
    """Elu-shaped penalty on unsatisfied knowledge: linear in the deficit
    below q, a bounded negative reward above it. Continuous, zero at
    sat == q, non-increasing in sat."""
    d = q - sat
    return beta * d if sat <= q else alpha * (math.exp(d) - 1.0)


@dataclass(frozen=True)
class RefuteResult:
    entailed: bool
    vacuous: bool
    sat: float
    phi: float
    counterexample: dict  # slot name -> value; None unless refuted
    runs: tuple

    def __str__(self):
        if not self.entailed:
            return (f"NOT entailed: counterexample with Sat={self.sat:.4f}, "
                    f"phi={self.phi:.4f}")
        tag = " (vacuously: knowledge base never satisfiable to q)" \
            if self.vacuous else ""
        return f"entailed{tag}: Sat={self.sat:.4f}, phi={self.phi:.4f}"


def reason_refute(build, phi, rcfg: RefutationConfig = None,
                  exists_p=None, forall_p=None) -> RefuteResult:
    """Search for a grounding that keeps the knowledge base satisfied
    (Sat >= q) while falsifying phi, by minimizing
    G(phi) + penalty(Sat). Finding one refutes entailment."""
    rcfg = rcfg or RefutationConfig()
    if not callable(build):
        if rcfg.restarts != 1:
            raise ValueError("multiple restarts need a theory builder")
        theory, build = build, lambda _: theory
    runs = []
    for i in range(rcfg.restarts):
        th = build(i)
        phi_ast = phi
        if isinstance(phi, str):
            from reallogic.parser import parse_formula
            phi_ast = parse_formula(phi, th.sig)
        th.env.training = False
        for _ in range(rcfg.epochs):
            sat = satisfiability(th, forall_p=forall_p, exists_p=exists_p)
            gphi = ground_formula(th.env, phi_ast, forall_p=forall_p,
                                  exists_p=exists_p).tensor
            d = rcfg.q - sat
            pen = T.where(sat.data <= rcfg.q, rcfg.beta * d,
                          rcfg.alpha * (T.exp(d) - 1.0))
            obj = gphi + pen
            if not np.isfinite(obj.data):
                raise DivergenceError("refutation objective diverged")
            grads = backward(obj, th.store)
            adam_step(th.store, grads, lr=rcfg.lr)
        sat = float(satisfiability(th, forall_p=forall_p,
                                   exists_p=exists_p).data)
        gphi = truth_value(th, phi_ast, forall_p=forall_p, exists_p=exists_p)
        runs.append(ReasonRun(i, sat, gphi))
        if sat >= rcfg.q and gphi < rcfg.q:
            snapshot = {n: th.store.get(n).data.copy()
                        for n in th.store.names()}
            assert sat >= rcfg.q and gphi < rcfg.q
            return RefuteResult(False, False, sat, gphi, snapshot,
                                tuple(runs))
    best = max(runs, key=lambda r: r.sat)
    vacuous = best.sat < rcfg.q
    return RefuteResult(True, vacuous, best.sat, best.phi, None, tuple(runs))


# -- metric output -------------------------------------------------------------


def write_metrics(records, jsonl_path=None, csv_path=None) -> None:
    """Emit the metric stream as JSON-lines and/or CSV. Keys are sorted
    and floats use repr, so equal runs produce identical bytes."""
    if jsonl_path is not None:
        with open(jsonl_path, "w") as fh:
            for rec in records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
    if csv_path is not None:
        keys = sorted({k for rec in records for k in rec})
        keys.remove("epoch")
        keys = ["epoch"] + keys
        with open(csv_path, "w") as fh:
            fh.write(",".join(keys) + "\n")
            for rec in records:
                fh.write(",".join("" if k not in rec else _fmt(rec[k])
                                  for k in keys) + "\n")


def _fmt(v) -> str:
    return str(v) if isinstance(v, int) else repr(float(v))
