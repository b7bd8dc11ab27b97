"""Turn a parsed theory document into a runnable Theory.

Declarations become groundings in a fresh GroundingEnv, config lines
select the fuzzy operators, and data references load CSVs relative to
the theory file (or are overridden by caller-supplied arrays).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from reallogic.datasets import DataError, load_csv
from reallogic.fuzzy import FuzzyConfig
from reallogic.logic import EvalError, free_vars, GroundingEnv
from reallogic.nn import MlpSpec, ParamStore
from reallogic.parser import (
    Axiom, ConfigDecl, ConstDecl, DomainDecl, FuncDecl, PredDecl, TheoryDoc,
    VarDecl, parse_theory_file,
)
from reallogic.training import Theory


class TheoryError(ValueError):
    pass


def euclidean(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sqrt(((a - b) ** 2).sum(axis=-1, keepdims=True))


BUILTINS = {"euclidean": euclidean}


def _where(span) -> str:
    if span is None:
        return ""
    return f"{span[0]}:{span[1]}: "


def _mlp_spec(decl, impl) -> MlpSpec:
    try:
        return MlpSpec(impl[1], impl[2], impl[3])
    except ValueError as e:
        raise TheoryError(f"{_where(decl.span)}{decl.name}: {e}") from None


def _feature_dim(sig, domains) -> int:
    return sum(sig.dim(d) for d in domains)


def build_theory(doc: TheoryDoc, seed: int = 0, data: dict = None,
                 strict_diag: bool = False) -> Theory:
    """Ground every declaration and collect the axioms.

    ``data`` maps variable names to instance arrays, overriding inline
    and file-backed declarations (demos use it to bind train splits).
    """
    doc.raise_on_errors()
    data = data or {}
    cfg = FuzzyConfig.stable_product()
    for c in doc.configs:
        try:
            cfg = cfg.with_tag(c.key, c.value)
        except ValueError as e:
            raise TheoryError(f"{_where(c.span)}{e}") from None
    store = ParamStore(seed)
    env = GroundingEnv(doc.sig, store, cfg, strict_diag=strict_diag)
    sig = doc.sig

    axioms = []
    for s in doc.statements:
        try:
            if isinstance(s, (DomainDecl, ConfigDecl)):
                continue
            elif isinstance(s, ConstDecl):
                init = None if s.init is None else np.array(s.init, dtype=float)
                env.add_const(s.name, init, trainable=s.trainable,
                              lo=s.lo, hi=s.hi)
            elif isinstance(s, VarDecl):
                if s.name in data:
                    env.add_var_data(s.name, data[s.name])
                elif s.source[0] == "inline":
                    env.add_var_data(s.name, np.array(s.source[1], dtype=float))
                elif s.source[0] == "consts":
                    env.add_var_consts(s.name, s.source[1])
                else:
                    env.add_var_data(s.name, _load_ref(doc, s))
            elif isinstance(s, FuncDecl):
                if s.impl[0] == "builtin":
                    if s.impl[1] not in BUILTINS:
                        raise TheoryError(f"{_where(s.span)}unknown builtin "
                                          f"{s.impl[1]!r}")
                    env.add_func_builtin(s.name, BUILTINS[s.impl[1]])
                else:
                    spec = _mlp_spec(s, s.impl)
                    _check_widths(s, spec, _feature_dim(sig, s.din),
                                  sig.dim(s.dout))
                    env.add_func_mlp(s.name, spec)
            elif isinstance(s, PredDecl):
                if s.impl[0] == "scalar":
                    env.add_pred_scalar(s.name, s.impl[1])
                elif s.impl[0] == "select":
                    spec = _mlp_spec(s, s.impl)
                    label_dim = sig.dim(s.din[-1])
                    out = None if label_dim == 1 else label_dim
                    _check_widths(s, spec, _feature_dim(sig, s.din[:-1]), out)
                    env.add_pred_select(s.name, spec)
                else:
                    spec = _mlp_spec(s, s.impl)
                    _check_widths(s, spec, _feature_dim(sig, s.din), 1)
                    env.add_pred_mlp(s.name, spec)
            elif isinstance(s, Axiom):
                loose = free_vars(s.formula)
                if loose:
                    raise TheoryError(f"{_where(s.span)}axiom is not closed: "
                                      f"free {', '.join(loose)}")
                axioms.append(s)
            else:
                raise TheoryError(f"unknown statement {s!r}")
        except (EvalError, ValueError) as e:
            if isinstance(e, TheoryError):
                raise
            name = getattr(s, "name", getattr(s, "label", "?"))
            raise TheoryError(f"{_where(s.span)}{name}: {e}") from None
    return Theory(tuple(axioms), env, doc=doc)


def _check_widths(decl, spec: MlpSpec, din: int, dout) -> None:
    if spec.widths[0] != din:
        raise TheoryError(f"{_where(decl.span)}{decl.name}: input width "
                          f"{spec.widths[0]} does not match feature dim {din}")
    if dout is not None and spec.widths[-1] != dout:
        raise TheoryError(f"{_where(decl.span)}{decl.name}: output width "
                          f"{spec.widths[-1]} does not match dim {dout}")


def _load_ref(doc: TheoryDoc, decl: VarDecl) -> np.ndarray:
    path = Path(decl.source[1])
    if not path.is_absolute():
        base = Path(doc.path).parent if Path(doc.path).exists() else None
        if base is None:
            raise TheoryError(f"{_where(decl.span)}{decl.name}: data file "
                              f"{decl.source[1]!r} needs a file-based theory "
                              "or an explicit binding")
        path = base / path
    try:
        ds = load_csv(path, decl.source[2])
    except (OSError, DataError) as e:
        raise TheoryError(f"{_where(decl.span)}{decl.name}: {e}") from None
    return ds.rows


def load_theory(path, seed: int = 0, data: dict = None,
                strict_diag: bool = False) -> Theory:
    return build_theory(parse_theory_file(path), seed=seed, data=data,
                        strict_diag=strict_diag)
