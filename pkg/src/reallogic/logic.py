"""Typed first-order language and its differentiable interpretation.

Symbols are declared in a :class:`Signature` (domains with feature
dimensions, constants, variables, functions, predicates). A
:class:`GroundingEnv` maps each symbol onto tensors: constants become
feature vectors (fixed or trainable), variables become stacks of
instances, functions and predicates become dense networks, builtins, or
trainable truth scalars.

Evaluation turns a term into a tensor shaped ``(n_v1, ..., n_vk, feat)``
and a formula into a truth tensor shaped ``(n_v1, ..., n_vk)``, one axis
per free variable in order of first syntactic occurrence. Connectives
align operand axes by name and broadcast, so ``P(x) -> Q(y)`` evaluates
on the full x-by-y grid while ``P(x) -> Q(x)`` stays elementwise.

Quantifiers aggregate named axes away. A quantifier group with several
variables is evaluated diagonally: the members share one axis, pairing
instance i with instance i, instead of spanning their product grid.
Guards restrict aggregation with a crisp boolean mask computed from
detached values, so no gradient ever flows through a guard; cells whose
guard never fires aggregate to 1 under forall and 0 under exists.
"""

from __future__ import annotations

import warnings
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from reallogic import tensor as T
from reallogic.fuzzy import FuzzyConfig, aggregate, apply_connective
from reallogic.nn import MlpSpec, ParamStore, dense_forward, init_mlp
from reallogic.tensor import Tensor


class EvalError(ValueError):
    """Formula or term cannot be evaluated against this grounding."""


class SignatureError(ValueError):
    """Symbol declaration or use violates the signature."""


# -- syntax trees -------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    name: str
    span: tuple = field(default=None, compare=False)


@dataclass(frozen=True)
class Var:
    name: str
    span: tuple = field(default=None, compare=False)


@dataclass(frozen=True)
class App:
    func: str
    args: tuple
    span: tuple = field(default=None, compare=False)


Term = Const | Var | App


@dataclass(frozen=True)
class Atom:
    pred: str
    args: tuple = ()
    span: tuple = field(default=None, compare=False)


@dataclass(frozen=True)
class Eq:
    lhs: Term
    rhs: Term
    span: tuple = field(default=None, compare=False)


@dataclass(frozen=True)
class Not:
    body: "Formula"
    span: tuple = field(default=None, compare=False)


@dataclass(frozen=True)
class Bin:
    op: str  # and | or | implies | iff
    lhs: "Formula"
    rhs: "Formula"
    span: tuple = field(default=None, compare=False)


@dataclass(frozen=True)
class Guard:
    """Comparison between affine combinations of scalar terms.

    Each side is a tuple of (coefficient, term-or-None); None stands for
    the constant 1, so ``(2.0, None)`` is the literal 2.
    """
    op: str  # < <= > >= = !=
    lhs: tuple
    rhs: tuple
    span: tuple = field(default=None, compare=False)


@dataclass(frozen=True)
class Quant:
    kind: str            # forall | exists
    groups: tuple        # tuple of tuples of var names; len > 1 = diagonal
    guard: Optional[Guard]
    body: "Formula"
    span: tuple = field(default=None, compare=False)


Formula = Atom | Eq | Not | Bin | Quant


@dataclass(frozen=True)
class Axiom:
    formula: Formula
    label: str = None
    forall_p: float = None
    exists_p: float = None
    span: tuple = field(default=None, compare=False)


# -- signature -----------------------------------------------------------------


class Signature:
    """Symbol table: domains with dims, plus typed symbol declarations."""

    def __init__(self):
        self.domains: dict[str, int] = {}
        self.constants: dict[str, str] = {}
        self.variables: dict[str, str] = {}
        self.functions: dict[str, tuple[tuple[str, ...], str]] = {}
        self.predicates: dict[str, tuple[str, ...]] = {}

    def _fresh(self, name: str) -> None:
        for table in (self.constants, self.variables, self.functions,
                      self.predicates, self.domains):
            if name in table:
                raise SignatureError(f"symbol {name!r} already declared")

    def add_domain(self, name: str, dim: int) -> None:
        if name in self.domains:
            raise SignatureError(f"domain {name!r} already declared")
        if dim < 1:
            raise SignatureError(f"domain {name!r} needs dim >= 1")
        self.domains[name] = int(dim)

    def _known(self, domain: str) -> str:
        if domain not in self.domains:
            raise SignatureError(f"unknown domain {domain!r}")
        return domain

    def add_constant(self, name: str, domain: str) -> None:
        self._fresh(name)
        self.constants[name] = self._known(domain)

    def add_variable(self, name: str, domain: str) -> None:
        self._fresh(name)
        self.variables[name] = self._known(domain)

    def add_function(self, name: str, din: tuple, dout: str) -> None:
        self._fresh(name)
        self.functions[name] = (tuple(self._known(d) for d in din),
                                self._known(dout))

    def add_predicate(self, name: str, din: tuple) -> None:
        self._fresh(name)
        self.predicates[name] = tuple(self._known(d) for d in din)

    def dim(self, domain: str) -> int:
        return self.domains[self._known(domain)]

    def term_domain(self, term: Term) -> str:
        if isinstance(term, Const):
            if term.name not in self.constants:
                raise SignatureError(f"unknown constant {term.name!r}")
            return self.constants[term.name]
        if isinstance(term, Var):
            if term.name not in self.variables:
                raise SignatureError(f"unknown variable {term.name!r}")
            return self.variables[term.name]
        if term.func not in self.functions:
            raise SignatureError(f"unknown function {term.func!r}")
        return self.functions[term.func][1]


def check_formula(sig: Signature, formula: Formula) -> None:
    """Raise SignatureError on any arity or domain mismatch."""

    def check_term(term: Term) -> str:
        if isinstance(term, App):
            din, _ = sig.functions.get(term.func) or _missing(term.func)
            _arity(term.func, din, term.args)
            for d, a in zip(din, term.args):
                got = check_term(a)
                if got != d:
                    raise SignatureError(
                        f"{term.func}: expected {d}, got {got}")
        return sig.term_domain(term)

    def _missing(name):
        raise SignatureError(f"unknown function {name!r}")

    def _arity(name, din, args):
        if len(din) != len(args):
            raise SignatureError(
                f"{name} takes {len(din)} arguments, got {len(args)}")

    def check_guard(g: Guard) -> None:
        for side in (g.lhs, g.rhs):
            for _, term in side:
                if term is None:
                    continue
                dom = check_term(term)
                if sig.dim(dom) != 1:
                    raise SignatureError(
                        f"guard term of domain {dom!r} is not scalar")

    def walk(f: Formula) -> None:
        if isinstance(f, Atom):
            if f.pred not in sig.predicates:
                raise SignatureError(f"unknown predicate {f.pred!r}")
            din = sig.predicates[f.pred]
            _arity(f.pred, din, f.args)
            for d, a in zip(din, f.args):
                got = check_term(a)
                if got != d:
                    raise SignatureError(f"{f.pred}: expected {d}, got {got}")
        elif isinstance(f, Eq):
            dl, dr = check_term(f.lhs), check_term(f.rhs)
            if dl != dr:
                raise SignatureError(f"= compares {dl!r} with {dr!r}")
        elif isinstance(f, Not):
            walk(f.body)
        elif isinstance(f, Bin):
            walk(f.lhs)
            walk(f.rhs)
        elif isinstance(f, Quant):
            seen = set()
            for group in f.groups:
                for v in group:
                    if v in seen:
                        raise SignatureError(f"variable {v!r} quantified twice")
                    seen.add(v)
                    if v not in sig.variables:
                        raise SignatureError(f"unknown variable {v!r}")
            if f.guard is not None:
                check_guard(f.guard)
            walk(f.body)
        else:
            raise SignatureError(f"not a formula node: {f!r}")

    walk(formula)


def free_vars(formula: Formula) -> tuple[str, ...]:
    """Free variables in order of first syntactic occurrence."""
    order: list[str] = []

    def see(name, bound):
        if name not in bound and name not in order:
            order.append(name)

    def term(t, bound):
        if isinstance(t, Var):
            see(t.name, bound)
        elif isinstance(t, App):
            for a in t.args:
                term(a, bound)

    def walk(f, bound):
        if isinstance(f, Atom):
            for a in f.args:
                term(a, bound)
        elif isinstance(f, Eq):
            term(f.lhs, bound)
            term(f.rhs, bound)
        elif isinstance(f, Not):
            walk(f.body, bound)
        elif isinstance(f, Bin):
            walk(f.lhs, bound)
            walk(f.rhs, bound)
        elif isinstance(f, Quant):
            inner = bound | {v for g in f.groups for v in g}
            if f.guard is not None:
                for side in (f.guard.lhs, f.guard.rhs):
                    for _, t in side:
                        if t is not None:
                            term(t, inner)
            walk(f.body, inner)

    walk(formula, set())
    return tuple(order)


# -- groundings -----------------------------------------------------------------


class GroundedValue(NamedTuple):
    tensor: Tensor
    vars: tuple


class GroundingEnv:
    """Maps symbols onto tensors and evaluates terms and formulas."""

    def __init__(self, sig: Signature, store: ParamStore,
                 cfg: FuzzyConfig = None, strict_diag: bool = False):
        self.sig = sig
        self.store = store
        self.cfg = cfg or FuzzyConfig.stable_product()
        self.training = False
        self.strict_diag = strict_diag
        self.eq_fn: Callable = None
        self._consts: dict[str, tuple] = {}
        self._vars: dict[str, tuple] = {}
        self._funcs: dict[str, tuple] = {}
        self._preds: dict[str, tuple] = {}
        self._binds: dict[str, np.ndarray] = {}
        self._diag_alias: dict[str, str] = {}
        self._diag_trunc: dict[str, int] = {}

    # -- declaration helpers ------------------------------------------

    def _dim_of(self, name: str, table: dict) -> int:
        if name not in table:
            raise EvalError(f"symbol {name!r} is not declared")
        return self.sig.dim(table[name])

    def add_const(self, name: str, value=None, trainable: bool = False,
                  lo=None, hi=None) -> None:
        dim = self._dim_of(name, self.sig.constants)
        if trainable:
            init = (self.store.rng.random(dim) if value is None
                    else np.asarray(value, dtype=np.float64))
            if init.shape != (dim,):
                raise EvalError(f"constant {name} needs shape ({dim},)")
            self.store.add(f"const/{name}", init, lo=lo, hi=hi)
            self._consts[name] = ("slot", f"const/{name}")
        else:
            arr = np.asarray(value, dtype=np.float64)
            if arr.shape != (dim,):
                raise EvalError(f"constant {name} needs shape ({dim},)")
            self._consts[name] = ("fixed", arr)

    def add_var_data(self, name: str, data) -> None:
        dim = self._dim_of(name, self.sig.variables)
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[1] != dim:
            raise EvalError(f"variable {name} needs shape (n, {dim})")
        if arr.shape[0] == 0:
            raise EvalError(f"variable {name} has no instances")
        self._vars[name] = ("data", arr)

    def add_var_consts(self, name: str, const_names) -> None:
        const_names = tuple(const_names)
        if not const_names:
            raise EvalError(f"variable {name} has no instances")
        vdom = self.sig.variables[name]
        for c in const_names:
            if c not in self._consts:
                raise EvalError(f"unknown or ungrounded constant {c!r}")
            if self.sig.constants[c] != vdom:
                raise EvalError(f"constant {c!r} is not in domain {vdom!r}")
        self._vars[name] = ("consts", const_names)

    def add_func_mlp(self, name: str, spec: MlpSpec) -> None:
        init_mlp(self.store, name, spec)
        self._funcs[name] = ("mlp", spec)

    def add_func_builtin(self, name: str, fn: Callable) -> None:
        """fn maps broadcast numpy arrays (..., din_i) to (..., dout);
        it is detached, so use it in guards, not in trained terms."""
        self._funcs[name] = ("builtin", fn)

    def add_pred_mlp(self, name: str, spec: MlpSpec) -> None:
        if spec.widths[-1] != 1:
            raise EvalError(f"predicate {name} network must end in width 1")
        init_mlp(self.store, name, spec)
        self._preds[name] = ("mlp", spec)

    def add_pred_select(self, name: str, spec: MlpSpec) -> None:
        """Network over all arguments but the last; the last argument's
        features weight the output classes (one-hot picks one)."""
        init_mlp(self.store, name, spec)
        self._preds[name] = ("select", spec)

    def add_pred_scalar(self, name: str, init=None) -> None:
        val = self.store.rng.random() if init is None else float(init)
        self.store.add(name, val, lo=0.0, hi=1.0)
        self._preds[name] = ("scalar", name)

    def add_pred_callable(self, name: str, fn: Callable) -> None:
        """fn takes aligned argument tensors, returns a truth Tensor."""
        self._preds[name] = ("callable", fn)

    # -- runtime rebinding ----------------------------------------------

    @contextmanager
    def bind(self, **arrays):
        """Temporarily rebind variables to new instance arrays.

        Data-backed variables take a float array (n, dim) or (n,);
        constant-backed variables take an integer index array selecting
        which constants to stack.
        """
        saved = dict(self._binds)
        for name, arr in arrays.items():
            if name not in self._vars:
                raise EvalError(f"cannot bind unknown variable {name!r}")
            self._binds[name] = np.asarray(arr)
        try:
            yield self
        finally:
            self._binds = saved

    # -- instance bookkeeping ---------------------------------------------

    def var_length(self, name: str) -> int:
        label = self._diag_alias.get(name, name)
        if name in self._binds:
            n = self._binds[name].shape[0]
        else:
            kind, payload = self._vars[name]
            n = payload.shape[0] if kind == "data" else len(payload)
        t = self._diag_trunc.get(label)
        return n if t is None else min(n, t)

    def _label_length(self, label: str) -> int:
        if label in self._diag_trunc:
            return self._diag_trunc[label]
        return self.var_length(label)

    def _var_value(self, name: str) -> GroundedValue:
        if name not in self._vars:
            raise EvalError(f"variable {name!r} has no grounding")
        label = self._diag_alias.get(name, name)
        n = self.var_length(name)
        bound = self._binds.get(name)
        kind, payload = self._vars[name]
        if kind == "data":
            if bound is not None:
                arr = np.asarray(bound, dtype=np.float64)
                if arr.ndim == 1:
                    arr = arr[:, None]
            else:
                arr = payload
            return GroundedValue(Tensor(arr[:n]), (label,))
        names = payload
        if bound is not None:
            names = tuple(names[int(i)] for i in np.asarray(bound).ravel())
        return GroundedValue(
            T.stack([self._const_value(c) for c in names[:n]], axis=0),
            (label,))

    def _const_value(self, name: str) -> Tensor:
        if name not in self._consts:
            raise EvalError(f"constant {name!r} has no grounding")
        kind, payload = self._consts[name]
        return self.store.get(payload) if kind == "slot" else Tensor(payload)


# -- axis alignment ------------------------------------------------------------


def _union_order(var_tuples) -> tuple:
    order: list[str] = []
    for vs in var_tuples:
        for v in vs:
            if v not in order:
                order.append(v)
    return tuple(order)


def _axis_sizes(values) -> dict:
    sizes: dict[str, int] = {}
    for gv in values:
        for ax, v in enumerate(gv.vars):
            n = gv.tensor.shape[ax]
            if sizes.setdefault(v, n) != n:
                raise EvalError(
                    f"variable {v!r} has {sizes[v]} instances on one side "
                    f"and {n} on another")
    return sizes


def _aligned(gv: GroundedValue, order: tuple, feature: bool) -> Tensor:
    """Reorder var axes to ``order`` and insert size-1 axes for the rest."""
    t = gv.tensor
    present = [v for v in order if v in gv.vars]
    perm = [gv.vars.index(v) for v in present]
    if perm != sorted(perm):
        t = T.moveaxis(t, perm, list(range(len(perm))))
    shape = [t.shape[present.index(v)] if v in gv.vars else 1 for v in order]
    if feature:
        shape.append(t.shape[-1])
    return T.reshape(t, tuple(shape))


def align(values, feature: bool):
    """Common (order, sizes, aligned tensors) for a list of GroundedValues."""
    order = _union_order([gv.vars for gv in values])
    sizes = _axis_sizes(values)
    return order, sizes, [_aligned(gv, order, feature) for gv in values]


def _align_np(arrays_with_vars):
    """Same alignment for detached numpy arrays (guard machinery)."""
    order = _union_order([vs for _, vs in arrays_with_vars])
    out = []
    for arr, vs in arrays_with_vars:
        arr = np.asarray(arr)
        present = [v for v in order if v in vs]
        perm = [vs.index(v) for v in present]
        if perm != sorted(perm):
            arr = np.moveaxis(arr, perm, range(len(perm)))
        shape = [arr.shape[present.index(v)] if v in vs else 1 for v in order]
        out.append(arr.reshape(shape))
    return order, out


# -- evaluation -------------------------------------------------------------------


def ground_term(env: GroundingEnv, term: Term) -> GroundedValue:
    if isinstance(term, Const):
        return GroundedValue(env._const_value(term.name), ())
    if isinstance(term, Var):
        return env._var_value(term.name)
    if not isinstance(term, App):
        raise EvalError(f"not a term: {term!r}")
    if term.func not in env._funcs:
        raise EvalError(f"function {term.func!r} has no grounding")
    kind, payload = env._funcs[term.func]
    args = [ground_term(env, a) for a in term.args]
    order, sizes, aligned = align(args, feature=True)
    if kind == "builtin":
        out = payload(*[t.data for t in aligned])
        return GroundedValue(Tensor(np.asarray(out, dtype=np.float64)), order)
    grid = tuple(sizes[v] for v in order)
    parts = [T.broadcast_to(t, grid + (t.shape[-1],)) for t in aligned]
    x = parts[0] if len(parts) == 1 else T.concat(parts, axis=-1)
    return GroundedValue(
        dense_forward(payload, env.store, term.func, x, training=env.training),
        order)


def _default_eq(env: GroundingEnv, u: Tensor, v: Tensor) -> Tensor:
    # exp(-alpha * ||u - v||); the tiny floor keeps the norm differentiable
    # at exact equality without visibly moving the value.
    d = u - v
    sq = T.reduce_sum(d * d, axes=(-1,))
    return T.exp(-env.cfg.eq_alpha * T.power(sq + 1e-12, 0.5))


def _eval_guard(env: GroundingEnv, guard: Guard):
    """Crisp mask over the guard's variables, from detached values."""

    def side(terms):
        pieces = []
        for coef, term in terms:
            if term is None:
                pieces.append((np.float64(coef), ()))
                continue
            was = env.training
            env.training = False  # guards never see dropout noise
            try:
                gv = ground_term(env, term)
            finally:
                env.training = was
            arr = gv.tensor.data
            if arr.shape[-1] != 1:
                raise EvalError("guard terms must be scalar-valued")
            pieces.append((coef * arr[..., 0], gv.vars))
        order, arrays = _align_np(pieces)
        return sum(arrays), order

    lv, lvars = side(guard.lhs)
    rv, rvars = side(guard.rhs)
    order, (lv, rv) = _align_np([(lv, lvars), (rv, rvars)])
    cmp = {"<": np.less, "<=": np.less_equal, ">": np.greater,
           ">=": np.greater_equal, "=": np.equal, "!=": np.not_equal}[guard.op]
    return cmp(lv, rv), order


def ground_formula(env: GroundingEnv, formula: Formula,
                   forall_p=None, exists_p=None) -> GroundedValue:
    """Evaluate a formula to a truth tensor with one axis per free var.

    forall_p / exists_p override the p of every matching quantifier in
    this formula (per-axiom annotations and schedules use this).
    """
    rec = lambda f: ground_formula(env, f, forall_p, exists_p)

    if isinstance(formula, Atom):
        return _atom(env, formula)
    if isinstance(formula, Eq):
        u, v = ground_term(env, formula.lhs), ground_term(env, formula.rhs)
        order, _, (tu, tv) = align([u, v], feature=True)
        fn = env.eq_fn or _default_eq
        return GroundedValue(fn(env, tu, tv), order)
    if isinstance(formula, Not):
        gv = rec(formula.body)
        return GroundedValue(apply_connective(env.cfg.neg, gv.tensor), gv.vars)
    if isinstance(formula, Bin):
        lhs, rhs = rec(formula.lhs), rec(formula.rhs)
        order, _, (a, b) = align([lhs, rhs], feature=False)
        if formula.op == "iff":
            fwd = apply_connective(env.cfg.impl, a, b)
            bwd = apply_connective(env.cfg.impl, b, a)
            out = apply_connective(env.cfg.conj, fwd, bwd)
        else:
            op = {"and": env.cfg.conj, "or": env.cfg.disj,
                  "implies": env.cfg.impl}[formula.op]
            out = apply_connective(op, a, b)
        return GroundedValue(out, order)
    if isinstance(formula, Quant):
        return _quant(env, formula, forall_p, exists_p)
    raise EvalError(f"not a formula node: {formula!r}")


def _atom(env: GroundingEnv, atom: Atom) -> GroundedValue:
    if atom.pred not in env._preds:
        raise EvalError(f"predicate {atom.pred!r} has no grounding")
    kind, payload = env._preds[atom.pred]
    if kind == "scalar":
        if atom.args:
            raise EvalError(f"{atom.pred} takes no arguments")
        return GroundedValue(env.store.get(payload), ())
    args = [ground_term(env, a) for a in atom.args]
    if kind == "callable":
        order, _, aligned = align(args, feature=True)
        return GroundedValue(payload(*aligned), order)
    order, sizes, aligned = align(args, feature=True)
    grid = tuple(sizes[v] for v in order)
    if kind == "select":
        label = aligned[-1]
        feats = aligned[:-1]
        nclass = payload.widths[-1]
        if label.shape[-1] == 1 and nclass > 1:
            # integer class index: expand to a one-hot, detached
            idx = label.data[..., 0].astype(int)
            hot = np.zeros(idx.shape + (nclass,))
            np.put_along_axis(hot, idx[..., None], 1.0, axis=-1)
            label = Tensor(hot)
        elif label.shape[-1] != nclass:
            raise EvalError(
                f"{atom.pred}: class argument has dim {label.shape[-1]}, "
                f"network has {nclass} outputs")
        parts = [T.broadcast_to(t, grid + (t.shape[-1],)) for t in feats]
        x = parts[0] if len(parts) == 1 else T.concat(parts, axis=-1)
        out = dense_forward(payload, env.store, atom.pred, x,
                            training=env.training)
        picked = T.reduce_sum(out * label, axes=(-1,))
        return GroundedValue(picked, order)
    # plain mlp predicate
    parts = [T.broadcast_to(t, grid + (t.shape[-1],)) for t in aligned]
    x = parts[0] if len(parts) == 1 else T.concat(parts, axis=-1)
    out = dense_forward(payload, env.store, atom.pred, x, training=env.training)
    return GroundedValue(T.reshape(out, out.shape[:-1]), order)


def _quant(env: GroundingEnv, node: Quant, forall_p, exists_p) -> GroundedValue:
    saved_alias = dict(env._diag_alias)
    saved_trunc = dict(env._diag_trunc)
    try:
        labels = []
        for group in node.groups:
            if len(group) == 1:
                labels.append(env._diag_alias.get(group[0], group[0]))
                continue
            label = "&".join(group)
            lens = [env.var_length(v) for v in group]
            if len(set(lens)) > 1:
                msg = (f"diagonal over {group} has unequal instance counts "
                       f"{lens}; truncating to {min(lens)}")
                if env.strict_diag:
                    raise EvalError(msg)
                warnings.warn(msg)
            for v in group:
                env._diag_alias[v] = label
            env._diag_trunc[label] = min(lens)
            labels.append(label)

        mask = mask_vars = None
        if node.guard is not None:
            mask, mask_vars = _eval_guard(env, node.guard)

        body = ground_formula(env, node.body, forall_p, exists_p)
        want = list(body.vars)
        for v in labels + list(mask_vars or ()):
            if v not in want:
                want.append(v)
        t = body.tensor
        if len(want) > len(body.vars):
            # broadcast over axes the body never mentioned
            grid = t.shape + tuple(env._label_length(v)
                                   for v in want[len(body.vars):])
            t = T.broadcast_to(T.reshape(t, t.shape + (1,) * (len(want) - len(body.vars))),
                               grid)
        if mask is not None:
            present = [v for v in want if v in mask_vars]
            perm = [mask_vars.index(v) for v in present]
            m = np.moveaxis(mask, perm, range(len(perm))) if perm != sorted(perm) else mask
            m = m.reshape([m.shape[present.index(v)] if v in mask_vars else 1
                           for v in want])
            mask = m

        axes = tuple(want.index(l) for l in labels)
        if node.kind == "forall":
            spec = env.cfg.forall.with_p(forall_p)
            empty = 1.0
        else:
            spec = env.cfg.exists.with_p(exists_p)
            empty = 0.0
        out = aggregate(spec, t, axes=axes, mask=mask, empty=empty)
        keep = tuple(v for v in want if v not in labels)
        return GroundedValue(out, keep)
    finally:
        env._diag_alias = saved_alias
        env._diag_trunc = saved_trunc


# -- convenience wrappers ------------------------------------------------------


def quantify(env: GroundingEnv, kind: str, var_names, body: Formula,
             p=None) -> GroundedValue:
    """Plain quantification over each named variable separately."""
    groups = tuple((v,) for v in var_names)
    node = Quant(kind, groups, None, body)
    return ground_formula(env, node,
                          forall_p=p if kind == "forall" else None,
                          exists_p=p if kind == "exists" else None)


def quantify_diag(env: GroundingEnv, kind: str, group, body: Formula,
                  p=None) -> GroundedValue:
    """Quantify variables jointly along their shared diagonal."""
    node = Quant(kind, (tuple(group),), None, body)
    return ground_formula(env, node,
                          forall_p=p if kind == "forall" else None,
                          exists_p=p if kind == "exists" else None)


def quantify_guarded(env: GroundingEnv, kind: str, groups, guard: Guard,
                     body: Formula, p=None) -> GroundedValue:
    """Quantify only over instances whose guard comparison holds."""
    groups = tuple(tuple(g) if not isinstance(g, str) else (g,) for g in groups)
    node = Quant(kind, groups, guard, body)
    return ground_formula(env, node,
                          forall_p=p if kind == "forall" else None,
                          exists_p=p if kind == "exists" else None)
