import numpy as np
import pytest

from reallogic.logic import (
    App, Atom, Axiom, Bin, Const, Eq, Guard, Not, Quant, Signature, Var,
)
from reallogic.parser import (
    ConfigDecl, ConstDecl, DomainDecl, FuncDecl, ParseError, PredDecl,
    VarDecl, parse_formula, parse_theory, parse_theory_file, pretty_formula,
    pretty_print, tokenize,
)


def small_sig():
    s = Signature()
    s.add_domain("item", 2)
    s.add_constant("c", "item")
    s.add_constant("d", "item")
    for v in "xyzw":
        s.add_variable(v, "item")
    s.add_function("f", ("item",), "item")
    s.add_function("g", ("item", "item"), "item")
    s.add_predicate("P", ("item",))
    s.add_predicate("Q", ("item",))
    s.add_predicate("S", ("item", "item"))
    s.add_predicate("R", ())
    return s


# -- tokenizer -----------------------------------------------------------------


def test_token_spans():
    toks = tokenize('domain d = 3\naxiom: "x"', filename="t.rl")
    assert [(t.text, t.span) for t in toks[:4]] == [
        ("domain", ("t.rl", 1, 1)),
        ("d", ("t.rl", 1, 8)),
        ("=", ("t.rl", 1, 10)),
        ("3", ("t.rl", 1, 12)),
    ]
    assert toks[4].span == ("t.rl", 2, 1)
    assert toks[6].kind == "string" and toks[6].span == ("t.rl", 2, 8)


def test_comments_and_numbers():
    toks = tokenize("1.5 2e-3 7 # trailing words\n0.25")
    assert [t.value for t in toks[:-1]] == [1.5, 2e-3, 7.0, 0.25]


def test_unicode_aliases_match_ascii():
    uni = tokenize("∀x: P(x) ∧ ¬Q(x) → R ∨ S ↔ T ≤ ≥ ≠ ∃")
    asc = tokenize("forall x: P(x) & ~Q(x) -> R | S <-> T <= >= != exists")
    assert [(t.kind, t.text) for t in uni] == [(t.kind, t.text) for t in asc]


def test_tokenizer_rejects_garbage():
    with pytest.raises(ParseError, match="stray"):
        tokenize("axiom: P $ Q")
    with pytest.raises(ParseError, match="unterminated"):
        tokenize('include "half')


# -- formula grammar -------------------------------------------------------------


def test_precedence_not_and_or_implies_iff():
    f = parse_formula("~P(x) & Q(x) | R -> R <-> R", small_sig(), check=False)
    px = Atom("P", (Var("x"),))
    qx = Atom("Q", (Var("x"),))
    r = Atom("R", ())
    assert f == Bin("iff",
                    Bin("implies", Bin("or", Bin("and", Not(px), qx), r), r),
                    r)


def test_implies_right_associative():
    f = parse_formula("P(x) -> Q(x) -> R", small_sig())
    assert f.op == "implies"
    assert f.rhs == Bin("implies", Atom("Q", (Var("x"),)), Atom("R", ()))


def test_parens_override_precedence():
    f = parse_formula("P(x) & (Q(x) | R)", small_sig())
    assert f.op == "and" and f.rhs.op == "or"


def test_equality_binds_tighter_than_connectives():
    f = parse_formula("f(x) = y & P(x)", small_sig())
    assert f == Bin("and",
                    Eq(App("f", (Var("x"),)), Var("y")),
                    Atom("P", (Var("x"),)))


def test_quantifier_body_extends_right():
    f = parse_formula("forall x: P(x) & Q(x) -> R", small_sig())
    assert isinstance(f, Quant)
    assert f.body.op == "implies"


def test_quantifier_groups_and_guard():
    f = parse_formula("forall (x, y), z [2*x - y <= 0.5]: S(x, y)",
                      small_sig(), check=False)
    assert f.groups == (("x", "y"), ("z",))
    assert f.guard == Guard("<=",
                            ((2.0, Var("x")), (-1.0, Var("y"))),
                            ((0.5, None),))


def test_guard_leading_minus_and_bare_term():
    f = parse_formula("exists x [-x + 1 > y]: P(x)", small_sig(), check=False)
    assert f.guard.lhs == ((-1.0, Var("x")), (1.0, None))
    assert f.guard.rhs == ((1.0, Var("y")),)


def test_unknown_symbols_are_errors():
    sig = small_sig()
    with pytest.raises(ParseError, match="unknown symbol 'nope'"):
        parse_formula("P(nope)", sig)
    with pytest.raises(ParseError, match="not a predicate"):
        parse_formula("f(x)", sig)
    with pytest.raises(ParseError, match="not a function or predicate"):
        parse_formula("c(x) = y", sig)
    with pytest.raises(ParseError, match="after formula"):
        parse_formula("P(x) Q(x)", sig)


def test_zero_ary_atom_and_double_negation():
    f = parse_formula("~~R", small_sig())
    assert f == Not(Not(Atom("R", ())))


# -- printing ---------------------------------------------------------------------


@pytest.mark.parametrize("text,shown", [
    ("((P(x) & Q(x)) | R)", "P(x) & Q(x) | R"),
    ("P(x) & (Q(x) | R)", "P(x) & (Q(x) | R)"),
    ("(P(x) -> Q(x)) -> R", "(P(x) -> Q(x)) -> R"),
    ("P(x) -> (Q(x) -> R)", "P(x) -> Q(x) -> R"),
    ("~(P(x) & R)", "~(P(x) & R)"),
    ("R & (forall x: P(x))", "R & (forall x: P(x))"),
    ("forall x: exists y: S(x, y)", "forall x: exists y: S(x, y)"),
    ("forall (x, y) [x - y = 0]: S(x, y)",
     "forall (x, y) [x - y = 0]: S(x, y)"),
])
def test_pretty_minimal_parens(text, shown):
    sig = small_sig()
    assert pretty_formula(parse_formula(text, sig, check=False)) == shown


def _rand_term(rng, depth):
    r = rng.random()
    if depth <= 0 or r < 0.55:
        pool = ["x", "y", "z", "w", "c", "d"]
        name = pool[rng.integers(len(pool))]
        return Var(name) if name in "xyzw" else Const(name)
    if r < 0.8:
        return App("f", (_rand_term(rng, depth - 1),))
    return App("g", (_rand_term(rng, depth - 1), _rand_term(rng, depth - 1)))


def _rand_formula(rng, depth, pool):
    r = rng.random()
    if depth <= 0 or r < 0.3:
        k = rng.integers(4)
        if k == 0:
            return Atom("P", (_rand_term(rng, 1),))
        if k == 1:
            return Atom("S", (_rand_term(rng, 1), _rand_term(rng, 1)))
        if k == 2:
            return Atom("R", ())
        return Eq(_rand_term(rng, 1), _rand_term(rng, 1))
    if r < 0.4:
        return Not(_rand_formula(rng, depth - 1, pool))
    if r < 0.5 and len(pool) >= 2:
        take = 2 if rng.random() < 0.3 else 1
        names = pool[:take + 1]
        groups = ((tuple(names[:take]),) if take > 1 or rng.random() < 0.7
                  else ((names[0],), (names[1],)))
        used = {v for g in groups for v in g}
        guard = None
        if rng.random() < 0.4:
            a, b = sorted(used)[0], pool[0]
            guard = Guard("<", ((1.0, Var(a)), (-1.0, Var(b))), ((0.5, None),))
        body = _rand_formula(rng, depth - 1, [v for v in pool if v not in used])
        return Quant("forall" if rng.random() < 0.5 else "exists",
                     groups, guard, body)
    op = ["and", "or", "implies", "iff"][rng.integers(4)]
    return Bin(op, _rand_formula(rng, depth - 1, pool),
               _rand_formula(rng, depth - 1, pool))


def _full_parens(f):
    """Independent printer: parenthesize every composite node."""
    if isinstance(f, Atom):
        if not f.args:
            return f.pred
        return f"{f.pred}({', '.join(_full_term(a) for a in f.args)})"
    if isinstance(f, Eq):
        return f"({_full_term(f.lhs)} = {_full_term(f.rhs)})"
    if isinstance(f, Not):
        return f"(~{_full_parens(f.body)})"
    if isinstance(f, Quant):
        groups = ", ".join(g[0] if len(g) == 1 else f"({', '.join(g)})"
                           for g in f.groups)
        guard = ""
        if f.guard is not None:
            (ca, ta), (cb, tb) = f.guard.lhs
            guard = f" [{ta.name} - {tb.name} < 0.5]"
        return f"({f.kind} {groups}{guard}: {_full_parens(f.body)})"
    sym = {"and": "&", "or": "|", "implies": "->", "iff": "<->"}[f.op]
    return f"({_full_parens(f.lhs)} {sym} {_full_parens(f.rhs)})"


def _full_term(t):
    if isinstance(t, App):
        return f"{t.func}({', '.join(_full_term(a) for a in t.args)})"
    return t.name


def test_random_formulas_round_trip():
    rng = np.random.default_rng(7)
    sig = small_sig()
    for _ in range(300):
        ast = _rand_formula(rng, 4, list("xyzw"))
        assert parse_formula(_full_parens(ast), sig, check=False) == ast
        shown = pretty_formula(ast)
        assert parse_formula(shown, sig, check=False) == ast
        assert pretty_formula(parse_formula(shown, sig, check=False)) == shown


# -- theories --------------------------------------------------------------------


SAMPLE = """
# sample knowledge base
domain item = 2
domain label = 3

const c : item = [1, 0]
const m : item = train in [0, 1]
const m2 : item = train([0.5, -0.25])

var x : item = [[0, 1], [1, 0], [0.5, 0.5]]
var xs : item = consts(c, m)
var lab : label = data "points.csv" cols f1, f2, f3

func f : item -> item = mlp(2, 8, 2; elu, linear)
func dist : item, item -> item = builtin euclidean

pred P : item = mlp(2, 8, 1; elu@0.25, sigmoid)
pred Cls : item, label = select mlp(2, 8, 3; elu, softmax)
pred A = scalar(0.5)

config and = product
config forall = pmean_error:p=4
config eq_alpha = 2

axiom "closure" @forall(p=6): forall x: P(x) -> P(f(x))
axiom: A | ~A
"""


def test_theory_declarations():
    doc = parse_theory(SAMPLE)
    assert doc.diagnostics == []
    s = doc.statements
    assert s[0] == DomainDecl("item", 2)
    assert s[2] == ConstDecl("c", "item", (1.0, 0.0))
    assert s[3] == ConstDecl("m", "item", None, True, 0.0, 1.0)
    assert s[4] == ConstDecl("m2", "item", (0.5, -0.25), True, None, None)
    assert s[5] == VarDecl("x", "item",
                           ("inline", ((0.0, 1.0), (1.0, 0.0), (0.5, 0.5))))
    assert s[6] == VarDecl("xs", "item", ("consts", ("c", "m")))
    assert s[7] == VarDecl("lab", "label",
                           ("data", "points.csv", ("f1", "f2", "f3")))
    assert s[8] == FuncDecl("f", ("item",), "item",
                            ("mlp", (2, 8, 2), ("elu", "linear"), (0.0, 0.0)))
    assert s[9] == FuncDecl("dist", ("item", "item"), "item",
                            ("builtin", "euclidean"))
    assert s[10] == PredDecl("P", ("item",),
                             ("mlp", (2, 8, 1), ("elu", "sigmoid"), (0.25, 0.0)))
    assert s[11].impl[0] == "select"
    assert s[12] == PredDecl("A", (), ("scalar", 0.5))
    assert doc.configs == [ConfigDecl("and", "product"),
                           ConfigDecl("forall", "pmean_error:p=4"),
                           ConfigDecl("eq_alpha", "2")]
    ax1, ax2 = doc.axioms
    assert ax1.label == "closure" and ax1.forall_p == 6.0 and ax1.exists_p is None
    assert isinstance(ax1.formula, Quant)
    assert ax2 == Axiom(Bin("or", Atom("A", ()), Not(Atom("A", ()))))
    assert doc.sig.predicates["Cls"] == ("item", "label")
    assert doc.sig.dim("item") == 2


def test_theory_pretty_print_fixpoint():
    doc = parse_theory(SAMPLE)
    text = pretty_print(doc)
    doc2 = parse_theory(text)
    assert doc2.diagnostics == []
    assert doc2.statements == doc.statements
    assert pretty_print(doc2) == text


def test_axioms_check_against_signature():
    doc = parse_theory("domain d = 1\npred P : d = mlp(1, 1; sigmoid)\n"
                       "var x : d = [1, 2]\naxiom: P(x, x)")
    assert len(doc.diagnostics) == 1
    assert "P takes 1 arguments" in doc.diagnostics[0].message
    assert doc.axioms == []


def test_recovery_continues_after_errors():
    text = """
domain item = 2
const broken : item =
pred P : item = mlp(2, 1; elu, sigmoid)
axiom: P(nope)
var x : item = [[0, 1]]
axiom: forall x: P(x)
"""
    doc = parse_theory(text, filename="bad.rl")
    assert len(doc.diagnostics) == 2
    assert "expected '['" in doc.diagnostics[0].message
    assert "unknown symbol 'nope'" in doc.diagnostics[1].message
    assert doc.diagnostics[1].span[0] == "bad.rl"
    kinds = [type(s).__name__ for s in doc.statements]
    assert kinds == ["DomainDecl", "PredDecl", "VarDecl", "Axiom"]
    with pytest.raises(ParseError, match="nope"):
        doc.raise_on_errors()


def test_duplicate_declaration_is_a_diagnostic():
    doc = parse_theory("domain d = 1\ndomain d = 2\nconst e : d = [1]\n"
                       "var e : d = [1]")
    msgs = " / ".join(d.message for d in doc.diagnostics)
    assert "'d' already declared" in msgs
    assert "'e' already declared" in msgs
    assert len(doc.statements) == 2


def test_include(tmp_path):
    (tmp_path / "base.rl").write_text(
        "domain d = 1\npred P : d = mlp(1, 1; sigmoid)\n")
    (tmp_path / "main.rl").write_text(
        'include "base.rl"\nvar x : d = [1, 2, 3]\naxiom: forall x: P(x)\n')
    doc = parse_theory_file(tmp_path / "main.rl")
    assert doc.diagnostics == []
    assert "P" in doc.sig.predicates
    assert len(doc.axioms) == 1

    (tmp_path / "a.rl").write_text('include "b.rl"\n')
    (tmp_path / "b.rl").write_text('include "a.rl"\n')
    doc = parse_theory_file(tmp_path / "a.rl")
    assert any("circular" in d.message for d in doc.diagnostics)

    doc = parse_theory('include "nowhere.rl"')
    assert any("file-based" in d.message for d in doc.diagnostics)


def test_axiom_annotation_validation():
    doc = parse_theory("domain d = 1\npred A = scalar\n"
                       "axiom @forall(q=2): A")
    assert any("only p" in d.message for d in doc.diagnostics)
