"""Grounding and evaluation: term grids, axis bookkeeping, quantifier
semantics (plain, diagonal, guarded), and gradient flow through formulas."""

import numpy as np
import pytest

import reallogic.tensor as T
from reallogic.fuzzy import FuzzyConfig
from reallogic.logic import (
    App, Atom, Axiom, Bin, Const, Eq, EvalError, Guard, GroundingEnv, Not,
    Quant, Signature, SignatureError, Var, check_formula, free_vars,
    ground_formula, ground_term, quantify, quantify_diag, quantify_guarded,
)
from reallogic.nn import MlpSpec, ParamStore
from reallogic.tensor import Tensor

from fdcheck import fd_store_grad

RAW = (FuzzyConfig.stable_product()
       .with_tag("and", "product").with_tag("or", "product")
       .with_tag("implies", "reichenbach")
       .with_tag("forall", "pmean_error:p=2").with_tag("exists", "pmean:p=2"))


def scalar_env(**preds):
    sig = Signature()
    env = GroundingEnv(sig, ParamStore(seed=0), cfg=RAW)
    for name, val in preds.items():
        sig.add_predicate(name, ())
        env.add_pred_scalar(name, init=val)
    return env


def num_env(cfg=RAW, **var_data):
    """1-d numeric domain with data variables and an identity truth pred."""
    sig = Signature()
    sig.add_domain("num", 1)
    env = GroundingEnv(sig, ParamStore(seed=0), cfg=cfg)
    for name, data in var_data.items():
        sig.add_variable(name, "num")
        env.add_var_data(name, np.asarray(data, float))
    sig.add_predicate("P", ("num",))
    env.add_pred_callable("P", lambda t: T.reshape(t, t.shape[:-1]))
    sig.add_predicate("P2", ("num", "num"))
    env.add_pred_callable("P2", lambda a, b: T.reduce_sum(a * b, axes=(-1,)))
    return env


def test_product_function_grid_matches_hand_values():
    sig = Signature()
    sig.add_domain("num", 1)
    sig.add_variable("x", "num")
    sig.add_variable("y", "num")
    sig.add_function("f", ("num", "num"), "num")
    env = GroundingEnv(sig, ParamStore())
    env.add_var_data("x", [1.0, 2.0, 3.0])
    env.add_var_data("y", [-1.0, -2.0])
    env.add_func_builtin("f", lambda a, b: a * b)
    gv = ground_term(env, App("f", (Var("x"), Var("y"))))
    assert gv.vars == ("x", "y")
    assert gv.tensor.shape == (3, 2, 1)
    assert np.allclose(gv.tensor.data[..., 0],
                       [[-1.0, -2.0], [-2.0, -4.0], [-3.0, -6.0]])


def test_constant_and_variable_grounding_shapes():
    sig = Signature()
    sig.add_domain("pt", 2)
    sig.add_constant("c", "pt")
    sig.add_variable("x", "pt")
    env = GroundingEnv(sig, ParamStore())
    env.add_const("c", [0.5, -0.5])
    env.add_var_data("x", np.zeros((4, 2)))
    cv = ground_term(env, Const("c"))
    assert cv.vars == () and cv.tensor.shape == (2,)
    xv = ground_term(env, Var("x"))
    assert xv.vars == ("x",) and xv.tensor.shape == (4, 2)
    with pytest.raises(EvalError):
        env.add_const("undeclared", [1.0])
    sig.add_constant("d", "pt")
    with pytest.raises(EvalError):
        env.add_const("d", [1.0])  # wrong shape for pt
    with pytest.raises(EvalError):
        env.add_var_data("x", np.zeros((0, 2)))


def test_shared_variable_stays_elementwise_distinct_vars_grid():
    env = num_env(x=[0.1, 0.2, 0.3], y=[0.5, 1.0])
    same = ground_formula(env, Bin("implies", Atom("P", (Var("x"),)),
                                   Atom("P", (Var("x"),))))
    assert same.vars == ("x",) and same.tensor.shape == (3,)
    gridded = ground_formula(env, Bin("implies", Atom("P", (Var("x"),)),
                                      Atom("P", (Var("y"),))))
    assert gridded.vars == ("x", "y") and gridded.tensor.shape == (3, 2)
    # reichenbach on the grid: 1 - a + a*b
    a = np.array([0.1, 0.2, 0.3])[:, None]
    b = np.array([0.5, 1.0])[None, :]
    assert np.allclose(gridded.tensor.data, 1 - a + a * b)


def test_axis_order_is_first_occurrence():
    env = num_env(x=[0.1, 0.2, 0.3], y=[0.5, 1.0])
    gv = ground_formula(env, Bin("and", Atom("P", (Var("y"),)),
                                 Atom("P", (Var("x"),))))
    assert gv.vars == ("y", "x")
    assert gv.tensor.shape == (2, 3)


def test_connective_values_through_formulas():
    env = scalar_env(A=0.3, B=0.8)
    f = lambda node: float(ground_formula(env, node).tensor.data)
    assert f(Not(Atom("A"))) == pytest.approx(0.7)
    assert f(Bin("and", Atom("A"), Atom("B"))) == pytest.approx(0.24)
    assert f(Bin("or", Atom("A"), Atom("B"))) == pytest.approx(0.86)
    assert f(Bin("implies", Atom("A"), Atom("B"))) == pytest.approx(0.94)
    # iff compiles to and(implies(a,b), implies(b,a))
    assert f(Bin("iff", Atom("A"), Atom("B"))) == pytest.approx(0.94 * 0.44)


def test_mlp_predicate_squeezes_feature_axis():
    sig = Signature()
    sig.add_domain("pt", 2)
    sig.add_variable("x", "pt")
    sig.add_predicate("P", ("pt",))
    env = GroundingEnv(sig, ParamStore(seed=4))
    env.add_var_data("x", np.random.default_rng(0).random((5, 2)))
    env.add_pred_mlp("P", MlpSpec((2, 3, 1), ("elu", "sigmoid")))
    gv = ground_formula(env, Atom("P", (Var("x"),)))
    assert gv.tensor.shape == (5,)
    assert np.all((gv.tensor.data > 0) & (gv.tensor.data < 1))
    with pytest.raises(EvalError):
        env.add_pred_mlp("Q", MlpSpec((2, 3, 2), ("elu", "softmax")))


def test_smooth_equality_value_and_alpha():
    sig = Signature()
    sig.add_domain("pt", 2)
    sig.add_constant("a", "pt")
    sig.add_constant("b", "pt")
    env = GroundingEnv(sig, ParamStore(),
                       cfg=RAW.with_tag("eq_alpha", "2.0"))
    env.add_const("a", [0.0, 0.0])
    env.add_const("b", [3.0, 4.0])
    gv = ground_formula(env, Eq(Const("a"), Const("b")))
    assert float(gv.tensor.data) == pytest.approx(np.exp(-2.0 * 5.0))
    same = ground_formula(env, Eq(Const("a"), Const("a")))
    assert float(same.tensor.data) == pytest.approx(1.0, abs=1e-5)


def test_forall_exists_basic_aggregation():
    cfg = RAW.with_tag("forall", "mean").with_tag("exists", "max")
    env = num_env(cfg=cfg, x=[0.2, 0.7, 0.8])
    allx = quantify(env, "forall", ["x"], Atom("P", (Var("x"),)))
    assert allx.vars == ()
    assert float(allx.tensor.data) == pytest.approx((0.2 + 0.7 + 0.8) / 3)
    some = quantify(env, "exists", ["x"], Atom("P", (Var("x"),)))
    assert float(some.tensor.data) == pytest.approx(0.8)


def test_quantifier_p_override_applies():
    env = num_env(x=[0.2, 0.7, 0.8])
    xs = np.array([0.2, 0.7, 0.8])
    got = quantify(env, "forall", ["x"], Atom("P", (Var("x"),)), p=4)
    assert float(got.tensor.data) == pytest.approx(
        1 - (np.mean((1 - xs) ** 4)) ** 0.25)
    got = quantify(env, "exists", ["x"], Atom("P", (Var("x"),)), p=6)
    assert float(got.tensor.data) == pytest.approx((np.mean(xs ** 6)) ** (1 / 6))


def test_nested_matches_joint_for_symmetric_p1():
    cfg = RAW.with_tag("forall", "pmean_error:p=1").with_tag("exists", "pmean:p=1")
    env = num_env(cfg=cfg, x=[0.1, 0.5, 0.9], y=[0.3, 0.7])
    body = Atom("P2", (Var("x"), Var("y")))
    nested = ground_formula(env, Quant("forall", (("x",),),
                                       None, Quant("forall", (("y",),), None, body)))
    joint = ground_formula(env, Quant("forall", (("x",), ("y",)), None, body))
    assert abs(float(nested.tensor.data) - float(joint.tensor.data)) < 1e-9
    nested = ground_formula(env, Quant("exists", (("x",),),
                                       None, Quant("exists", (("y",),), None, body)))
    joint = ground_formula(env, Quant("exists", (("x",), ("y",)), None, body))
    assert abs(float(nested.tensor.data) - float(joint.tensor.data)) < 1e-9


def test_diagonal_quantification_matches_paired_oracle():
    cfg = RAW.with_tag("forall", "mean")
    xs = [0.1, 0.5, 0.9]
    ys = [0.3, 0.7, 0.2]
    env = num_env(cfg=cfg, x=xs, y=ys)
    body = Atom("P2", (Var("x"), Var("y")))
    diag = quantify_diag(env, "forall", ("x", "y"), body)
    want = np.mean([a * b for a, b in zip(xs, ys)])
    assert float(diag.tensor.data) == pytest.approx(want)
    grid = quantify(env, "forall", ["x", "y"], body)
    assert float(grid.tensor.data) == pytest.approx(np.outer(xs, ys).mean())
    assert not np.isclose(float(diag.tensor.data), float(grid.tensor.data))


def test_diagonal_truncates_with_warning_and_strict_raises():
    cfg = RAW.with_tag("forall", "mean")
    env = num_env(cfg=cfg, x=[0.1, 0.5, 0.9], y=[0.3, 0.7])
    body = Atom("P2", (Var("x"), Var("y")))
    with pytest.warns(UserWarning, match="truncating"):
        gv = quantify_diag(env, "forall", ("x", "y"), body)
    assert float(gv.tensor.data) == pytest.approx(
        np.mean([0.1 * 0.3, 0.5 * 0.7]))
    env.strict_diag = True
    with pytest.raises(EvalError, match="unequal"):
        quantify_diag(env, "forall", ("x", "y"), body)


def test_guarded_mean_fixture():
    # instances scoring (0.2, 0.7, 0.8); the guard admits the last two
    cfg = RAW.with_tag("forall", "mean")
    env = num_env(cfg=cfg, x=[2.0, 7.0, 8.0])
    sig = env.sig
    sig.add_predicate("tenth", ("num",))
    env.add_pred_callable("tenth",
                          lambda t: T.reshape(t * 0.1, t.shape[:-1]))
    guard = Guard(">", ((1.0, Var("x")),), ((5.0, None),))
    gv = quantify_guarded(env, "forall", ["x"], guard,
                          Atom("tenth", (Var("x"),)))
    assert float(gv.tensor.data) == pytest.approx(0.75)


def test_empty_guard_gives_vacuous_truth():
    env = num_env(x=[1.0, 2.0, 3.0])
    guard = Guard(">", ((1.0, Var("x")),), ((100.0, None),))
    body = Atom("P", (Var("x"),))
    # P values are out of [0,1] here but never touched: all cells masked out
    env2 = num_env(x=[0.1, 0.2, 0.3])
    allx = quantify_guarded(env2, "forall", ["x"], guard, body)
    assert float(allx.tensor.data) == 1.0
    some = quantify_guarded(env2, "exists", ["x"], guard, body)
    assert float(some.tensor.data) == 0.0


def test_guard_with_affine_combination_and_builtin():
    sig = Signature()
    sig.add_domain("pt", 2)
    sig.add_domain("num", 1)
    sig.add_variable("u", "pt")
    sig.add_variable("v", "pt")
    sig.add_function("dist", ("pt", "pt"), "num")
    sig.add_predicate("close", ("pt", "pt"))
    env = GroundingEnv(sig, ParamStore(), cfg=RAW.with_tag("forall", "mean"))
    rng = np.random.default_rng(1)
    us, vs = rng.random((4, 2)), rng.random((3, 2))
    env.add_var_data("u", us)
    env.add_var_data("v", vs)
    env.add_func_builtin(
        "dist", lambda a, b: np.sqrt(((a - b) ** 2).sum(-1, keepdims=True)))
    env.add_pred_callable(
        "close", lambda a, b: T.reduce_sum((a - b) * 0.0, axes=(-1,)) + 0.5)
    d = np.sqrt(((us[:, None, :] - vs[None, :, :]) ** 2).sum(-1))
    # guard: 2*dist(u,v) < 1.1  <=>  dist < 0.55
    guard = Guard("<", ((2.0, App("dist", (Var("u"), Var("v")))),),
                  ((1.1, None),))
    gv = quantify_guarded(env, "forall", ["u", "v"], guard,
                          Atom("close", (Var("u"), Var("v"))))
    want_mask = 2 * d < 1.1
    assert want_mask.any() and not want_mask.all()  # fixture is informative
    assert float(gv.tensor.data) == pytest.approx(0.5)
    # per-cell truth is 0.5, so masked mean is 0.5 wherever nonempty; check
    # the mask actually bit by quantifying only over v with u free
    gv_u = quantify_guarded(env, "forall", ["v"], guard,
                            Atom("close", (Var("u"), Var("v"))))
    assert gv_u.vars == ("u",)
    empty_rows = ~want_mask.any(axis=1)
    if empty_rows.any():
        assert np.allclose(gv_u.tensor.data[empty_rows], 1.0)


def test_out_of_guard_instances_get_zero_gradient():
    sig = Signature()
    sig.add_domain("num", 1)
    for c in ("a", "b", "c"):
        sig.add_constant(c, "num")
    sig.add_variable("x", "num")
    sig.add_predicate("P", ("num",))
    store = ParamStore(seed=0)
    env = GroundingEnv(sig, store, cfg=RAW.with_tag("forall", "mean"))
    env.add_const("a", [0.2], trainable=True)
    env.add_const("b", [0.6], trainable=True)
    env.add_const("c", [0.9], trainable=True)
    env.add_var_consts("x", ("a", "b", "c"))
    env.add_pred_callable("P", lambda t: T.reshape(t, t.shape[:-1]))
    guard = Guard("<", ((1.0, Var("x")),), ((0.8, None),))
    gv = quantify_guarded(env, "forall", ["x"], guard, Atom("P", (Var("x"),)))
    assert float(gv.tensor.data) == pytest.approx(0.4)
    gv.tensor.backward()
    assert np.allclose(store.get("const/a").grad, 0.5)
    assert np.allclose(store.get("const/b").grad, 0.5)
    assert np.all(store.get("const/c").grad == 0.0)  # fully outside the guard


def test_vacuous_quantified_variable_broadcasts():
    env = scalar_env(A=0.3)
    sig = env.sig
    sig.add_domain("num", 1)
    sig.add_variable("x", "num")
    env.add_var_data("x", [1.0, 2.0, 3.0, 4.0])
    env.cfg = RAW.with_tag("forall", "prod")
    gv = quantify(env, "forall", ["x"], Atom("A"))
    assert float(gv.tensor.data) == pytest.approx(0.3 ** 4)


def test_bind_rebinds_data_and_const_variables():
    env = num_env(cfg=RAW.with_tag("forall", "mean"), x=[0.1, 0.2, 0.3, 0.4])
    body = Atom("P", (Var("x"),))
    with env.bind(x=np.array([0.4, 0.8])):
        gv = quantify(env, "forall", ["x"], body)
        assert float(gv.tensor.data) == pytest.approx(0.6)
    gv = quantify(env, "forall", ["x"], body)
    assert float(gv.tensor.data) == pytest.approx(0.25)

    sig = Signature()
    sig.add_domain("num", 1)
    for c in ("a", "b"):
        sig.add_constant(c, "num")
    sig.add_variable("z", "num")
    sig.add_predicate("P", ("num",))
    env2 = GroundingEnv(sig, ParamStore(), cfg=RAW.with_tag("forall", "mean"))
    env2.add_const("a", [0.2])
    env2.add_const("b", [0.8])
    env2.add_var_consts("z", ("a", "b"))
    env2.add_pred_callable("P", lambda t: T.reshape(t, t.shape[:-1]))
    with env2.bind(z=np.array([1])):
        gv = quantify(env2, "forall", ["z"], Atom("P", (Var("z"),)))
        assert float(gv.tensor.data) == pytest.approx(0.8)
    with pytest.raises(EvalError):
        with env2.bind(w=np.array([0])):
            pass


def test_select_predicate_one_hot_and_integer_labels():
    sig = Signature()
    sig.add_domain("pt", 2)
    sig.add_domain("label3", 3)
    sig.add_domain("idx", 1)
    sig.add_variable("x", "pt")
    sig.add_variable("l", "label3")
    sig.add_variable("d", "idx")
    sig.add_predicate("C", ("pt", "label3"))
    sig.add_predicate("D", ("pt", "idx"))
    store = ParamStore(seed=8)
    env = GroundingEnv(sig, store)
    spec = MlpSpec((2, 4, 3), ("elu", "softmax"))
    env.add_pred_select("C", spec)
    rng = np.random.default_rng(2)
    xs = rng.random((5, 2))
    env.add_var_data("x", xs)
    env.add_var_data("l", np.eye(3))
    env.add_var_data("d", np.array([0.0, 1.0, 2.0]))

    from reallogic.nn import dense_forward
    probs = dense_forward(spec, store, "C", Tensor(xs)).data

    gv = ground_formula(env, Atom("C", (Var("x"), Var("l"))))
    assert gv.vars == ("x", "l") and gv.tensor.shape == (5, 3)
    assert np.allclose(gv.tensor.data, probs)

    spec2 = MlpSpec((2, 4, 3), ("elu", "softmax"))
    env.add_pred_select("D", spec2)
    gv2 = ground_formula(env, Atom("D", (Var("x"), Var("d"))))
    probs2 = dense_forward(spec2, store, "D", Tensor(xs)).data
    assert np.allclose(gv2.tensor.data, probs2)

    sig.add_variable("bad", "pt")
    env.add_var_data("bad", rng.random((2, 2)))
    with pytest.raises(EvalError, match="class argument"):
        ground_formula(env, Atom("C", (Var("x"), Var("bad"))))


def test_formula_gradients_match_fd_through_quantifiers():
    sig = Signature()
    sig.add_domain("pt", 2)
    sig.add_variable("x", "pt")
    sig.add_predicate("P", ("pt",))
    sig.add_predicate("Q", ("pt",))
    store = ParamStore(seed=13)
    env = GroundingEnv(sig, store, cfg=RAW)
    env.add_var_data("x", np.random.default_rng(3).random((6, 2)))
    env.add_pred_mlp("P", MlpSpec((2, 3, 1), ("elu", "sigmoid")))
    env.add_pred_mlp("Q", MlpSpec((2, 3, 1), ("elu", "sigmoid")))
    node = Quant("forall", (("x",),), None,
                 Bin("implies", Atom("P", (Var("x"),)), Atom("Q", (Var("x"),))))

    def value():
        return float(ground_formula(env, node).tensor.data)

    out = ground_formula(env, node).tensor
    out.backward()
    for name in store.names():
        got = store.get(name).grad
        want = fd_store_grad(store, name, value)
        assert np.allclose(got, want, rtol=1e-4, atol=1e-7), name


def test_check_formula_catches_type_errors():
    sig = Signature()
    sig.add_domain("pt", 2)
    sig.add_domain("num", 1)
    sig.add_variable("x", "pt")
    sig.add_variable("t", "num")
    sig.add_constant("c", "pt")
    sig.add_function("f", ("pt",), "num")
    sig.add_predicate("P", ("pt",))
    check_formula(sig, Atom("P", (Var("x"),)))
    check_formula(sig, Eq(App("f", (Var("x"),)), Var("t")))
    with pytest.raises(SignatureError, match="unknown predicate"):
        check_formula(sig, Atom("Nope", (Var("x"),)))
    with pytest.raises(SignatureError, match="takes 1"):
        check_formula(sig, Atom("P", (Var("x"), Var("x"))))
    with pytest.raises(SignatureError, match="expected pt"):
        check_formula(sig, Atom("P", (Var("t"),)))
    with pytest.raises(SignatureError, match="compares"):
        check_formula(sig, Eq(Var("x"), Var("t")))
    with pytest.raises(SignatureError, match="quantified twice"):
        check_formula(sig, Quant("forall", (("x", "x"),), None,
                                 Atom("P", (Var("x"),))))
    with pytest.raises(SignatureError, match="not scalar"):
        check_formula(sig, Quant("forall", (("x",),),
                                 Guard("<", ((1.0, Var("x")),), ((1.0, None),)),
                                 Atom("P", (Var("x"),))))


def test_free_vars_order_and_binding():
    f = Bin("and", Atom("P", (Var("y"),)),
            Quant("forall", (("x",),), None,
                  Bin("or", Atom("P", (Var("x"),)), Atom("P", (Var("z"),)))))
    assert free_vars(f) == ("y", "z")
    g = Quant("exists", (("a", "b"),),
              Guard("<", ((1.0, Var("a")),), ((1.0, Var("w")),)),
              Atom("P2", (Var("a"), Var("b"))))
    assert free_vars(g) == ("w",)


def test_span_is_ignored_in_equality():
    assert Var("x", span=("f", 1, 2)) == Var("x")
    assert Atom("P", (Var("x"),), span=("f", 3, 4)) == Atom("P", (Var("x"),))
    assert Axiom(Atom("P"), label="a") == Axiom(Atom("P"), label="a")


def test_signature_rejects_duplicates_and_unknown_domains():
    sig = Signature()
    sig.add_domain("pt", 2)
    with pytest.raises(SignatureError):
        sig.add_domain("pt", 3)
    with pytest.raises(SignatureError):
        sig.add_variable("x", "nope")
    sig.add_variable("x", "pt")
    with pytest.raises(SignatureError):
        sig.add_constant("x", "pt")
    with pytest.raises(SignatureError):
        sig.add_domain("zero", 0)


def test_mixed_diag_and_plain_groups():
    cfg = RAW.with_tag("forall", "mean")
    env = num_env(cfg=cfg, x=[0.1, 0.2], y=[0.3, 0.4], z=[0.5, 1.0])
    sig = env.sig
    sig.add_predicate("P3", ("num", "num", "num"))
    env.add_pred_callable(
        "P3", lambda a, b, c: T.reduce_sum(a * b * c, axes=(-1,)))
    node = Quant("forall", (("x", "y"), ("z",)), None,
                 Atom("P3", (Var("x"), Var("y"), Var("z"))))
    gv = ground_formula(env, node)
    pairs = [0.1 * 0.3, 0.2 * 0.4]
    want = np.mean([p * z for p in pairs for z in (0.5, 1.0)])
    assert float(gv.tensor.data) == pytest.approx(want)
