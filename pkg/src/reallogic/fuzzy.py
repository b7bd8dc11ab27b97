"""Fuzzy connectives and aggregators on truth tensors.

Connectives come in families, keyed per kind:

- ``not``: ``standard`` (1 - a)
- ``and``: ``min``, ``product``, ``luk``
- ``or``: ``max``, ``product`` (probabilistic sum), ``luk``
- ``implies``: ``kleene_dienes``, ``godel``, ``reichenbach``, ``goguen``,
  ``luk``

Aggregators generalize them over whole axes: ``min``, ``max``, ``prod``,
``prob_sum``, ``luk_and``, ``luk_or``, ``mean``, ``pmean``,
``pmean_error``. ``pmean`` leans toward the largest inputs as p grows
(existential flavor); ``pmean_error`` penalizes the largest deviations
from 1 (universal flavor).

Most of these have gradient pathologies somewhere on [0, 1]: min/max
propagate through a single input, product families flatline at the
corners, p-means blow up at them. The "stable" variants squeeze inputs
away from the corners with the affine maps pi0(x) = (1-eps)x + eps and
pi1(x) = (1-eps)x, trading exact boundary identities (e.g. and(a, 1) is
no longer a) for bounded, nonvanishing gradients. ``derivative_profile``
measures all of this empirically.

Piecewise ops use a fixed subgradient convention: the branch condition is
evaluated on values and frozen, so e.g. godel/goguen/luk implications
take the derivative of their "otherwise" branch when a > b and zero when
a <= b.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from reallogic import tensor as T
from reallogic.tensor import DomainError, Tensor, astensor

_CONNECTIVE_FAMILIES = {
    "not": ("standard",),
    "and": ("min", "product", "luk"),
    "or": ("max", "product", "luk"),
    "implies": ("kleene_dienes", "godel", "reichenbach", "goguen", "luk"),
}
_AGG_FAMILIES = ("min", "max", "mean", "pmean", "pmean_error",
                 "prod", "prob_sum", "luk_and", "luk_or")
_STABLE_CONNECTIVES = {("and", "product"), ("or", "product"),
                       ("implies", "reichenbach")}
_STABLE_AGGS = ("pmean", "pmean_error")

_TOL = 1e-9  # forgiveness for float drift outside [0, 1]


@dataclass(frozen=True)
class ConnectiveOp:
    kind: str
    family: str
    stable: bool = False
    eps: float = 1e-4

    def __post_init__(self):
        if self.kind not in _CONNECTIVE_FAMILIES:
            raise ValueError(f"unknown connective kind {self.kind!r}")
        if self.family not in _CONNECTIVE_FAMILIES[self.kind]:
            raise ValueError(f"no {self.kind} family {self.family!r}")
        if self.stable and (self.kind, self.family) not in _STABLE_CONNECTIVES:
            raise ValueError(f"{self.kind}:{self.family} has no stable form")
        if not 0.0 < self.eps < 0.5:
            raise ValueError("eps must be in (0, 0.5)")

    def __str__(self):
        return f"{self.kind}:{self.family}{'_stable' if self.stable else ''}"


@dataclass(frozen=True)
class AggregatorSpec:
    family: str
    p: float = None
    stable: bool = False
    eps: float = 1e-4

    def __post_init__(self):
        if self.family not in _AGG_FAMILIES:
            raise ValueError(f"unknown aggregator family {self.family!r}")
        if self.family in ("pmean", "pmean_error"):
            p = 2.0 if self.p is None else float(self.p)
            if p < 1.0:
                raise ValueError("p must be >= 1")
            object.__setattr__(self, "p", p)
        elif self.p is not None:
            raise ValueError(f"{self.family} takes no p")
        if self.stable and self.family not in _STABLE_AGGS:
            raise ValueError(f"{self.family} has no stable form")
        if not 0.0 < self.eps < 0.5:
            raise ValueError("eps must be in (0, 0.5)")

    def with_p(self, p) -> "AggregatorSpec":
        if self.family not in ("pmean", "pmean_error") or p is None:
            return self
        return dataclasses.replace(self, p=float(p))

    def __str__(self):
        tag = f"{self.family}{'_stable' if self.stable else ''}"
        return f"{tag}:p={self.p:g}" if self.p is not None else tag


def _pi0(t: Tensor, eps: float) -> Tensor:
    return (1.0 - eps) * t + eps


def _pi1(t: Tensor, eps: float) -> Tensor:
    return (1.0 - eps) * t


def _checked(t) -> Tensor:
    """Validate truth values; clamp only float drift within _TOL."""
    t = astensor(t)
    d = t.data
    if d.size:
        lo, hi = d.min(), d.max()
        if lo < -_TOL or hi > 1.0 + _TOL:
            raise DomainError(f"truth value outside [0, 1]: range [{lo}, {hi}]")
        if lo < 0.0 or hi > 1.0:
            t = T.minimum(T.maximum(t, 0.0), 1.0)
    return t


def apply_connective(op: ConnectiveOp, a, b=None) -> Tensor:
    a = _checked(a)
    if op.kind == "not":
        if b is not None:
            raise ValueError("not is unary")
        return 1.0 - a
    if b is None:
        raise ValueError(f"{op.kind} needs two operands")
    b = _checked(b)
    f, eps = op.family, op.eps
    if op.kind == "and":
        if f == "min":
            return T.minimum(a, b)
        if f == "product":
            if op.stable:
                a, b = _pi0(a, eps), _pi0(b, eps)
            return a * b
        return T.maximum(a + b - 1.0, 0.0)  # luk
    if op.kind == "or":
        if f == "max":
            return T.maximum(a, b)
        if f == "product":
            if op.stable:
                a, b = _pi1(a, eps), _pi1(b, eps)
            return a + b - a * b
        return T.minimum(a + b, 1.0)  # luk
    # implies
    if f == "kleene_dienes":
        return T.maximum(1.0 - a, b)
    if f == "godel":
        return T.where(a.data <= b.data, 1.0, b)
    if f == "reichenbach":
        if op.stable:
            a2 = _pi0(a, eps)
            return 1.0 - a2 + a2 * _pi1(b, eps)
        return 1.0 - a + a * b
    if f == "goguen":
        denom = T.where(a.data > b.data, a, 1.0)
        return T.where(a.data <= b.data, 1.0, b / denom)
    return T.where(a.data <= b.data, 1.0, 1.0 - a + b)  # luk


def _norm_axes(t: Tensor, axes):
    if axes is None:
        return tuple(range(t.data.ndim))
    if isinstance(axes, int):
        axes = (axes,)
    return tuple(sorted(ax % t.data.ndim for ax in axes))


def aggregate(spec: AggregatorSpec, t, axes=None, mask=None, empty=None) -> Tensor:
    """Aggregate truth values over ``axes``.

    ``mask`` (a constant boolean array broadcastable to ``t``) restricts
    the aggregation to selected cells. Result cells whose mask count is
    zero are patched with ``empty`` (1 for vacuous universals, 0 for
    failed existentials); leaving ``empty`` as None on an empty cell is
    an error at use sites, so the raw aggregate value leaks through only
    when every cell is populated.
    """
    t = _checked(t)
    axes = _norm_axes(t, axes)
    if not axes and t.data.ndim > 0:
        return t
    f, eps = spec.family, spec.eps

    if mask is not None:
        m = np.broadcast_to(np.asarray(mask, dtype=bool), t.data.shape)
        mt = m.astype(np.float64)
        count = mt.sum(axis=axes or None)
    else:
        m = mt = None
        count = float(np.prod([t.data.shape[ax] for ax in axes], dtype=np.float64)
                      if axes else t.data.size)

    def fill(x, v):
        return x if m is None else T.where(m, x, v)

    def msum(x):
        return T.reduce_sum(x if mt is None else x * mt, axes)

    denom = np.maximum(count, 1.0)

    if f == "min":
        out = T.reduce_min(fill(t, 1.0), axes)
    elif f == "max":
        out = T.reduce_max(fill(t, 0.0), axes)
    elif f == "prod":
        out = T.reduce_prod(fill(t, 1.0), axes)
    elif f == "prob_sum":
        out = 1.0 - T.reduce_prod(fill(1.0 - t, 1.0), axes)
    elif f == "luk_and":
        out = T.maximum(msum(t) - count + 1.0, 0.0)
    elif f == "luk_or":
        out = T.minimum(msum(t), 1.0)
    elif f == "mean":
        out = msum(t) / denom
    elif f == "pmean":
        x = _pi0(t, eps) if spec.stable else t
        out = T.power(msum(T.power(x, spec.p)) / denom, 1.0 / spec.p)
    else:  # pmean_error
        x = _pi1(t, eps) if spec.stable else t
        out = 1.0 - T.power(msum(T.power(1.0 - x, spec.p)) / denom, 1.0 / spec.p)

    if mask is not None and empty is not None and np.any(count == 0):
        out = T.where(count == 0, float(empty), out)
    return out


# -- configuration ------------------------------------------------------------

_KIND_TO_FIELD = {"not": "neg", "and": "conj", "or": "disj", "implies": "impl",
                  "forall": "forall", "exists": "exists", "agg": "sat_agg"}


@dataclass(frozen=True)
class FuzzyConfig:
    """Operator choices for a whole theory, plus the equality sharpness."""
    neg: ConnectiveOp = ConnectiveOp("not", "standard")
    conj: ConnectiveOp = ConnectiveOp("and", "product", stable=True)
    disj: ConnectiveOp = ConnectiveOp("or", "product", stable=True)
    impl: ConnectiveOp = ConnectiveOp("implies", "reichenbach", stable=True)
    forall: AggregatorSpec = AggregatorSpec("pmean_error", p=2, stable=True)
    exists: AggregatorSpec = AggregatorSpec("pmean", p=2, stable=True)
    sat_agg: AggregatorSpec = AggregatorSpec("pmean_error", p=2, stable=True)
    eq_alpha: float = 1.0

    @classmethod
    def stable_product(cls, eps: float = 1e-4) -> "FuzzyConfig":
        return cls(
            neg=ConnectiveOp("not", "standard"),
            conj=ConnectiveOp("and", "product", stable=True, eps=eps),
            disj=ConnectiveOp("or", "product", stable=True, eps=eps),
            impl=ConnectiveOp("implies", "reichenbach", stable=True, eps=eps),
            forall=AggregatorSpec("pmean_error", p=2, stable=True, eps=eps),
            exists=AggregatorSpec("pmean", p=2, stable=True, eps=eps),
            sat_agg=AggregatorSpec("pmean_error", p=2, stable=True, eps=eps),
        )

    def op_for(self, kind: str):
        return getattr(self, _KIND_TO_FIELD[kind])

    def with_tag(self, kind: str, tag: str) -> "FuzzyConfig":
        """Replace one operator from its text form, e.g. ("and", "luk")."""
        if kind == "eq_alpha":
            return dataclasses.replace(self, eq_alpha=float(tag))
        if kind not in _KIND_TO_FIELD:
            raise ValueError(f"unknown config key {kind!r}")
        return dataclasses.replace(self, **{_KIND_TO_FIELD[kind]: parse_op_tag(kind, tag)})


def parse_op_tag(kind: str, text: str):
    """Parse "product_stable" or "pmean_error:p=2,eps=1e-3" style tags."""
    base, _, params = text.strip().partition(":")
    base = base.strip()
    stable = base.endswith("_stable")
    if stable:
        base = base[: -len("_stable")]
    kwargs = {}
    for kv in filter(None, (s.strip() for s in params.split(","))):
        k, sep, v = kv.partition("=")
        if not sep:
            raise ValueError(f"bad op parameter {kv!r}")
        try:
            kwargs[k.strip()] = float(v)
        except ValueError:
            raise ValueError(f"bad op parameter {kv!r}") from None
    extra = set(kwargs) - {"p", "eps"}
    if extra:
        raise ValueError(f"unknown op parameters {sorted(extra)}")
    if kind in _CONNECTIVE_FAMILIES:
        if "p" in kwargs:
            raise ValueError(f"{kind} takes no p")
        return ConnectiveOp(kind, base, stable, kwargs.get("eps", 1e-4))
    if kind in ("forall", "exists", "agg"):
        return AggregatorSpec(base, kwargs.get("p"), stable, kwargs.get("eps", 1e-4))
    raise ValueError(f"unknown config key {kind!r}")


# -- empirical gradient classification ----------------------------------------


def connective_grid(n: int = 5):
    """All pairs over an n-point lattice of [0, 1], corners included."""
    vals = np.linspace(0.0, 1.0, n)
    return [(float(a), float(b)) for a in vals for b in vals]


def aggregator_grid(size: int = 4):
    """Corner and interior input vectors for aggregator profiling."""
    return [np.zeros(size), np.ones(size), np.full(size, 0.5),
            np.linspace(0.1, 0.9, size), np.linspace(0.0, 1.0, size)]


def derivative_profile(op, points=None) -> dict:
    """Classify an operator's gradient behavior on a grid of inputs.

    - single_passing: at every point, at most one input coordinate gets a
      gradient above 1e-6 (min/max style bottlenecks).
    - vanishing: at some point every coordinate's gradient is finite and
      below 1e-6, so learning stalls there.
    - exploding: some coordinate exceeds 1e6 or is not finite.
    """
    if points is None:
        points = aggregator_grid() if isinstance(op, AggregatorSpec) else connective_grid()
    single = True
    vanishing = False
    exploding = False
    for pt in points:
        if isinstance(op, AggregatorSpec):
            x = Tensor(np.asarray(pt, dtype=np.float64), requires_grad=True)
            out = aggregate(op, x, axes=(0,))
            out.backward()
            grads = np.abs(x.grad) if x.grad is not None else np.zeros(x.shape)
        elif op.kind == "not":
            x = Tensor(float(pt if np.isscalar(pt) else pt[0]), requires_grad=True)
            apply_connective(op, x).backward()
            grads = np.abs(np.atleast_1d(x.grad if x.grad is not None else 0.0))
        else:
            xa = Tensor(float(pt[0]), requires_grad=True)
            xb = Tensor(float(pt[1]), requires_grad=True)
            apply_connective(op, xa, xb).backward()
            grads = np.abs(np.array([float(xa.grad) if xa.grad is not None else 0.0,
                                     float(xb.grad) if xb.grad is not None else 0.0]))
        finite = np.isfinite(grads)
        if not finite.all() or (grads[finite] > 1e6).any():
            exploding = True
        active = (grads > 1e-6) & finite
        if active.sum() > 1:
            single = False
        if finite.all() and not active.any():
            vanishing = True
    return {"single_passing": single, "vanishing": vanishing, "exploding": exploding}
