"""Text format for theories: declarations, operator config, and axioms.

Grammar (EBNF, ``#`` starts a line comment, whitespace is free-form):

    theory      = { statement } ;
    statement   = domain | constdecl | vardecl | funcdecl | preddecl
                | configdecl | includedecl | axiomdecl ;

    domain      = "domain" IDENT "=" NUMBER ;
    constdecl   = "const" IDENT ":" IDENT "=" constinit ;
    constinit   = vector
                | "train" [ "(" vector ")" ] [ "in" "[" NUMBER "," NUMBER "]" ] ;
    vardecl     = "var" IDENT ":" IDENT "=" varinit ;
    varinit     = vector                      (* rows; scalars or vectors *)
                | "consts" "(" IDENT { "," IDENT } ")"
                | "data" STRING [ "cols" IDENT { "," IDENT } ] ;
    funcdecl    = "func" IDENT ":" IDENT { "," IDENT } "->" IDENT "=" funcimpl ;
    funcimpl    = mlp | "builtin" IDENT ;
    preddecl    = "pred" IDENT [ ":" IDENT { "," IDENT } ] "=" predimpl ;
    predimpl    = mlp | "select" mlp | "scalar" [ "(" NUMBER ")" ] ;
    mlp         = "mlp" "(" NUMBER { "," NUMBER } ";" act { "," act } ")" ;
    act         = IDENT [ "@" NUMBER ]        (* activation, dropout rate *)
    configdecl  = "config" IDENT "=" configval ;
    includedecl = "include" STRING ;
    axiomdecl   = "axiom" [ STRING ] { "@" IDENT "(" "p" "=" NUMBER ")" }
                  ":" formula ;

    formula     = iff ;
    iff         = imp { "<->" imp } ;
    imp         = or [ "->" imp ] ;           (* right-associative *)
    or          = and { "|" and } ;
    and         = unary { "&" unary } ;
    unary       = "~" unary | quant | "(" formula ")" | atom ;
    quant       = ( "forall" | "exists" ) group { "," group }
                  [ "[" guard "]" ] ":" formula ;   (* body extends right *)
    group       = IDENT | "(" IDENT { "," IDENT } ")" ;  (* tuple = diagonal *)
    guard       = gsum ( "<" | "<=" | ">" | ">=" | "=" | "!=" ) gsum ;
    gsum        = gpiece { ( "+" | "-" ) gpiece } ;
    gpiece      = NUMBER [ "*" term ] | term ;
    atom        = term [ "=" term ] ;         (* a lone predicate term is an
                                                 atom; "=" makes an equality *)
    term        = IDENT [ "(" term { "," term } ")" ] ;
    vector      = "[" element { "," element } "]" ;
    element     = signed NUMBER | vector ;

Unicode forms are accepted for logical symbols: for-all and exists
quantifier signs, conjunction/disjunction wedges, the negation sign,
single arrows, the double-headed arrow, and slanted comparison signs.
Statements are newline-insensitive; a parse error skips ahead to the
next statement keyword and is reported in ``TheoryDoc.diagnostics``.

Identifiers must be declared before use; the parser resolves each name
against the signature built so far, which is how ``P(x)`` becomes an
atom while ``f(x)`` stays a term.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from reallogic.logic import (
    App, Atom, Axiom, Bin, Const, Eq, Guard, Not, Quant, Signature,
    SignatureError, Var, check_formula,
)

STATEMENT_KEYWORDS = ("domain", "const", "var", "func", "pred",
                      "axiom", "config", "include")
_KEYWORDS = STATEMENT_KEYWORDS + ("forall", "exists", "in", "train", "consts",
                                  "data", "cols", "mlp", "select", "scalar",
                                  "builtin")

_UNICODE_ALIASES = {
    "∀": "forall", "∃": "exists", "∧": "&", "∨": "|",
    "¬": "~", "→": "->", "↔": "<->", "≤": "<=",
    "≥": ">=", "≠": "!=",
}

_PUNCT = ("<->", "->", "<=", ">=", "!=", "(", ")", "[", "]", ",", ":", ";",
          "=", "<", ">", "~", "&", "|", "@", "+", "-", "*")


class ParseError(ValueError):
    def __init__(self, message, span=None):
        self.span = span
        self.message = message
        super().__init__(message if span is None else
                         f"{span[0]}:{span[1]}:{span[2]}: {message}")


@dataclass(frozen=True)
class Diagnostic:
    message: str
    span: tuple  # (file, line, col)

    def __str__(self):
        f, line, col = self.span
        return f"{f}:{line}:{col}: {self.message}"


@dataclass(frozen=True)
class Token:
    kind: str  # ident | keyword | number | string | punct | eof
    text: str
    value: object
    span: tuple


def tokenize(text: str, filename: str = "<theory>") -> list[Token]:
    tokens = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        span = (filename, line, col)
        if c in _UNICODE_ALIASES:
            alias = _UNICODE_ALIASES[c]
            kind = "keyword" if alias in ("forall", "exists") else "punct"
            tokens.append(Token(kind, alias, alias, span))
            i += 1
            col += 1
            continue
        if c == '"':
            j = i + 1
            out = []
            while j < n and text[j] != '"':
                if text[j] == "\\" and j + 1 < n:
                    out.append(text[j + 1])
                    j += 2
                else:
                    out.append(text[j])
                    j += 1
            if j >= n:
                raise ParseError("unterminated string", span)
            tokens.append(Token("string", text[i:j + 1], "".join(out), span))
            col += j + 1 - i
            i = j + 1
            continue
        m = re.match(r"\d+(\.\d*)?([eE][+-]?\d+)?", text[i:])
        if m:
            tokens.append(Token("number", m.group(0), float(m.group(0)), span))
            i += m.end()
            col += m.end()
            continue
        m = re.match(r"[A-Za-z_][A-Za-z0-9_]*", text[i:])
        if m:
            word = m.group(0)
            kind = "keyword" if word in _KEYWORDS else "ident"
            tokens.append(Token(kind, word, word, span))
            i += m.end()
            col += m.end()
            continue
        for p in _PUNCT:
            if text.startswith(p, i):
                tokens.append(Token("punct", p, p, span))
                i += len(p)
                col += len(p)
                break
        else:
            raise ParseError(f"stray character {c!r}", span)
    tokens.append(Token("eof", "", None, (filename, line, col)))
    return tokens


# -- declaration records -------------------------------------------------------


@dataclass(frozen=True)
class DomainDecl:
    name: str
    dim: int
    span: tuple = field(default=None, compare=False)


@dataclass(frozen=True)
class ConstDecl:
    name: str
    domain: str
    init: tuple          # nested tuples or None
    trainable: bool = False
    lo: float = None
    hi: float = None
    span: tuple = field(default=None, compare=False)


@dataclass(frozen=True)
class VarDecl:
    name: str
    domain: str
    source: tuple        # ("inline", rows) | ("consts", names) | ("data", path, cols)
    span: tuple = field(default=None, compare=False)


@dataclass(frozen=True)
class FuncDecl:
    name: str
    din: tuple
    dout: str
    impl: tuple          # ("mlp", widths, acts, drops) | ("builtin", name)
    span: tuple = field(default=None, compare=False)


@dataclass(frozen=True)
class PredDecl:
    name: str
    din: tuple
    impl: tuple          # ("mlp"|"select", widths, acts, drops) | ("scalar", init)
    span: tuple = field(default=None, compare=False)


@dataclass(frozen=True)
class ConfigDecl:
    key: str
    value: str
    span: tuple = field(default=None, compare=False)


@dataclass
class TheoryDoc:
    path: str
    sig: Signature
    statements: list
    diagnostics: list

    @property
    def axioms(self) -> list[Axiom]:
        return [s for s in self.statements if isinstance(s, Axiom)]

    @property
    def configs(self) -> list[ConfigDecl]:
        return [s for s in self.statements if isinstance(s, ConfigDecl)]

    def raise_on_errors(self) -> "TheoryDoc":
        if self.diagnostics:
            raise ParseError("\n".join(str(d) for d in self.diagnostics))
        return self


class _Parser:
    def __init__(self, tokens, sig, statements, diagnostics, base, seen):
        self.toks = tokens
        self.pos = 0
        self.sig = sig
        self.statements = statements
        self.diagnostics = diagnostics
        self.base = base
        self.seen = seen

    # -- token helpers ---------------------------------------------------

    def peek(self) -> Token:
        return self.toks[self.pos]

    def next(self) -> Token:
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def at(self, kind, text=None) -> bool:
        t = self.peek()
        return t.kind == kind and (text is None or t.text == text)

    def eat(self, kind, text=None):
        if self.at(kind, text):
            return self.next()
        return None

    def expect(self, kind, text=None) -> Token:
        t = self.peek()
        if not self.at(kind, text):
            want = text or kind
            raise ParseError(f"expected {want!r}, found {t.text or t.kind!r}",
                             t.span)
        return self.next()

    def _recover(self):
        depth = 0
        while not self.at("eof"):
            t = self.peek()
            if t.kind == "punct" and t.text in "([":
                depth += 1
            elif t.kind == "punct" and t.text in ")]":
                depth = max(0, depth - 1)
            elif depth == 0 and t.kind == "keyword" and t.text in STATEMENT_KEYWORDS:
                return
            self.next()

    # -- driver ------------------------------------------------------------

    def run(self):
        while not self.at("eof"):
            start = self.pos
            try:
                self.statement()
            except (ParseError, SignatureError) as e:
                span = getattr(e, "span", None) or self.peek().span
                msg = getattr(e, "message", None) or e.args[0]
                self.diagnostics.append(Diagnostic(msg, span))
                if self.pos == start:
                    self.next()
                self._recover()

    def statement(self):
        t = self.peek()
        if t.kind != "keyword" or t.text not in STATEMENT_KEYWORDS:
            raise ParseError(f"expected a statement, found {t.text or 'end of input'!r}",
                             t.span)
        getattr(self, "s_" + t.text)()

    # -- statements -----------------------------------------------------------

    def s_domain(self):
        span = self.next().span
        name = self.expect("ident").text
        self.expect("punct", "=")
        dim = self.expect("number")
        if dim.value != int(dim.value):
            raise ParseError("domain dimension must be an integer", dim.span)
        self.sig.add_domain(name, int(dim.value))
        self.statements.append(DomainDecl(name, int(dim.value), span))

    def s_const(self):
        span = self.next().span
        name = self.expect("ident").text
        self.expect("punct", ":")
        domain = self.expect("ident").text
        self.expect("punct", "=")
        if self.eat("keyword", "train"):
            init = None
            if self.eat("punct", "("):
                init = self.vector()
                self.expect("punct", ")")
            lo = hi = None
            if self.eat("keyword", "in"):
                lo, hi = self.interval()
            decl = ConstDecl(name, domain, init, True, lo, hi, span)
        else:
            decl = ConstDecl(name, domain, self.vector(), False, None, None, span)
        self.sig.add_constant(name, domain)
        self.statements.append(decl)

    def s_var(self):
        span = self.next().span
        name = self.expect("ident").text
        self.expect("punct", ":")
        domain = self.expect("ident").text
        self.expect("punct", "=")
        if self.eat("keyword", "consts"):
            self.expect("punct", "(")
            names = [self.expect("ident").text]
            while self.eat("punct", ","):
                names.append(self.expect("ident").text)
            self.expect("punct", ")")
            source = ("consts", tuple(names))
        elif self.eat("keyword", "data"):
            path = self.expect("string").value
            cols = None
            if self.eat("keyword", "cols"):
                cols = [self.expect("ident").text]
                while self.eat("punct", ","):
                    cols.append(self.expect("ident").text)
                cols = tuple(cols)
            source = ("data", path, cols)
        else:
            source = ("inline", self.vector())
        self.sig.add_variable(name, domain)
        self.statements.append(VarDecl(name, domain, source, span))

    def s_func(self):
        span = self.next().span
        name = self.expect("ident").text
        self.expect("punct", ":")
        din = [self.expect("ident").text]
        while self.eat("punct", ","):
            din.append(self.expect("ident").text)
        self.expect("punct", "->")
        dout = self.expect("ident").text
        self.expect("punct", "=")
        if self.eat("keyword", "builtin"):
            impl = ("builtin", self.expect("ident").text)
        else:
            impl = self.mlp_impl("mlp")
        self.sig.add_function(name, tuple(din), dout)
        self.statements.append(FuncDecl(name, tuple(din), dout, impl, span))

    def s_pred(self):
        span = self.next().span
        name = self.expect("ident").text
        din = []
        if self.eat("punct", ":"):
            din.append(self.expect("ident").text)
            while self.eat("punct", ","):
                din.append(self.expect("ident").text)
        self.expect("punct", "=")
        if self.eat("keyword", "scalar"):
            init = None
            if self.eat("punct", "("):
                init = self.signed_number()
                self.expect("punct", ")")
            impl = ("scalar", init)
        elif self.eat("keyword", "select"):
            impl = self.mlp_impl("select")
        else:
            impl = self.mlp_impl("mlp")
        self.sig.add_predicate(name, tuple(din))
        self.statements.append(PredDecl(name, tuple(din), impl, span))

    def mlp_impl(self, tag):
        self.expect("keyword", "mlp")
        self.expect("punct", "(")
        widths = [int(self.expect("number").value)]
        while self.eat("punct", ","):
            widths.append(int(self.expect("number").value))
        self.expect("punct", ";")
        acts, drops = [], []
        while True:
            acts.append(self.expect("ident").text)
            drops.append(self.signed_number() if self.eat("punct", "@") else 0.0)
            if not self.eat("punct", ","):
                break
        self.expect("punct", ")")
        return (tag, tuple(widths), tuple(acts), tuple(drops))

    def s_config(self):
        span = self.next().span
        t = self.peek()
        # keys include "forall"/"exists", which tokenize as keywords
        if t.kind not in ("ident", "keyword") or t.text in STATEMENT_KEYWORDS:
            raise ParseError("expected a config key", t.span)
        key = self.next().text
        self.expect("punct", "=")
        # the value runs to the next statement keyword: an op tag like
        # "pmean_error:p=2,eps=1e-3", or a bare number for eq_alpha
        parts = []
        while not self.at("eof"):
            t = self.peek()
            if t.kind == "keyword" and t.text in STATEMENT_KEYWORDS:
                break
            if t.kind not in ("ident", "number") and \
                    not (t.kind == "punct" and t.text in (":", ",", "=")):
                break
            parts.append(self.next().text)
        if not parts:
            raise ParseError("missing config value", self.peek().span)
        self.statements.append(ConfigDecl(key, "".join(parts), span))

    def s_include(self):
        span = self.next().span
        rel = self.expect("string").value
        if self.base is None:
            raise ParseError("include needs a file-based theory", span)
        path = (Path(self.base) / rel).resolve()
        if str(path) in self.seen:
            raise ParseError(f"circular include of {rel!r}", span)
        if not path.exists():
            raise ParseError(f"included file {rel!r} not found", span)
        self.seen.add(str(path))
        toks = tokenize(path.read_text(), str(path))
        sub = _Parser(toks, self.sig, self.statements, self.diagnostics,
                      path.parent, self.seen)
        sub.run()

    def s_axiom(self):
        span = self.next().span
        label = None
        if self.at("string"):
            label = self.next().value
        forall_p = exists_p = None
        while self.eat("punct", "@"):
            kw = self.peek()
            if kw.text not in ("forall", "exists"):
                raise ParseError("expected @forall(p=..) or @exists(p=..)", kw.span)
            self.next()
            self.expect("punct", "(")
            pname = self.expect("ident")
            if pname.text != "p":
                raise ParseError("only p can be overridden", pname.span)
            self.expect("punct", "=")
            val = self.signed_number()
            self.expect("punct", ")")
            if kw.text == "forall":
                forall_p = val
            else:
                exists_p = val
        self.expect("punct", ":")
        f = self.formula()
        check_formula(self.sig, f)
        self.statements.append(Axiom(f, label, forall_p, exists_p, span))

    # -- shared small pieces ------------------------------------------------

    def signed_number(self) -> float:
        neg = bool(self.eat("punct", "-"))
        v = self.expect("number").value
        return -v if neg else v

    def interval(self):
        self.expect("punct", "[")
        lo = self.signed_number()
        self.expect("punct", ",")
        hi = self.signed_number()
        self.expect("punct", "]")
        return lo, hi

    def vector(self):
        self.expect("punct", "[")
        items = [self.element()]
        while self.eat("punct", ","):
            items.append(self.element())
        self.expect("punct", "]")
        return tuple(items)

    def element(self):
        if self.at("punct", "["):
            return self.vector()
        return self.signed_number()

    # -- formulas -------------------------------------------------------------

    def formula(self):
        return self.iff()

    def iff(self):
        lhs = self.imp()
        while True:
            t = self.eat("punct", "<->")
            if not t:
                return lhs
            lhs = Bin("iff", lhs, self.imp(), span=t.span)

    def imp(self):
        lhs = self.orx()
        t = self.eat("punct", "->")
        if t:
            return Bin("implies", lhs, self.imp(), span=t.span)
        return lhs

    def orx(self):
        lhs = self.andx()
        while True:
            t = self.eat("punct", "|")
            if not t:
                return lhs
            lhs = Bin("or", lhs, self.andx(), span=t.span)

    def andx(self):
        lhs = self.unary()
        while True:
            t = self.eat("punct", "&")
            if not t:
                return lhs
            lhs = Bin("and", lhs, self.unary(), span=t.span)

    def unary(self):
        t = self.eat("punct", "~")
        if t:
            return Not(self.unary(), span=t.span)
        if self.at("keyword", "forall") or self.at("keyword", "exists"):
            return self.quant()
        if self.eat("punct", "("):
            f = self.formula()
            self.expect("punct", ")")
            return f
        return self.atom()

    def quant(self):
        kw = self.next()
        groups = [self.group()]
        while self.eat("punct", ","):
            groups.append(self.group())
        guard = None
        if self.eat("punct", "["):
            guard = self.guard()
            self.expect("punct", "]")
        self.expect("punct", ":")
        body = self.formula()
        return Quant(kw.text, tuple(groups), guard, body, span=kw.span)

    def group(self):
        if self.eat("punct", "("):
            names = [self.expect("ident").text]
            while self.eat("punct", ","):
                names.append(self.expect("ident").text)
            self.expect("punct", ")")
            if len(names) < 2:
                raise ParseError("a diagonal group needs at least two variables",
                                 self.peek().span)
            return tuple(names)
        return (self.expect("ident").text,)

    def guard(self) -> Guard:
        span = self.peek().span
        lhs = self.gsum()
        t = self.peek()
        if not (t.kind == "punct" and t.text in ("<", "<=", ">", ">=", "=", "!=")):
            raise ParseError("expected a comparison in guard", t.span)
        self.next()
        rhs = self.gsum()
        return Guard(t.text, lhs, rhs, span=span)

    def gsum(self):
        sign = -1.0 if self.eat("punct", "-") else 1.0
        pieces = [self.gpiece(sign)]
        while True:
            if self.eat("punct", "+"):
                pieces.append(self.gpiece(1.0))
            elif self.eat("punct", "-"):
                pieces.append(self.gpiece(-1.0))
            else:
                return tuple(pieces)

    def gpiece(self, sign):
        if self.at("number"):
            coef = sign * self.next().value
            if self.eat("punct", "*"):
                return (coef, self.term())
            return (coef, None)
        return (sign, self.term())

    def atom(self):
        t = self.peek()
        if t.kind != "ident":
            raise ParseError(f"expected a formula, found {t.text or t.kind!r}",
                             t.span)
        term = self.term()
        if self.eat("punct", "="):
            return Eq(term, self.term(), span=t.span)
        if isinstance(term, App):
            if term.func in self.sig.predicates:
                return Atom(term.func, term.args, span=t.span)
            raise ParseError(f"{term.func!r} is not a predicate", t.span)
        name = term.name
        if name in self.sig.predicates:
            return Atom(name, (), span=t.span)
        raise ParseError(f"{name!r} is not a predicate", t.span)

    def term(self):
        t = self.expect("ident")
        if self.eat("punct", "("):
            args = [self.term()]
            while self.eat("punct", ","):
                args.append(self.term())
            self.expect("punct", ")")
            if t.text in self.sig.predicates:
                return App(t.text, tuple(args), span=t.span)  # atom() converts
            if t.text not in self.sig.functions:
                raise ParseError(f"{t.text!r} is not a function or predicate",
                                 t.span)
            return App(t.text, tuple(args), span=t.span)
        if t.text in self.sig.variables:
            return Var(t.text, span=t.span)
        if t.text in self.sig.constants:
            return Const(t.text, span=t.span)
        if t.text in self.sig.predicates:
            return Const(t.text, span=t.span)  # 0-ary atom; atom() converts
        raise ParseError(f"unknown symbol {t.text!r}", t.span)


def parse_theory(text: str, filename: str = "<theory>", base=None) -> TheoryDoc:
    """Parse theory text; include paths resolve relative to ``base``."""
    sig = Signature()
    statements: list = []
    diagnostics: list = []
    toks = tokenize(text, filename)
    p = _Parser(toks, sig, statements, diagnostics, base, set())
    p.run()
    return TheoryDoc(filename, sig, statements, diagnostics)


def parse_formula(text: str, sig: Signature, filename: str = "<formula>",
                  check: bool = True):
    """Parse one formula against an existing signature."""
    toks = tokenize(text, filename)
    p = _Parser(toks, sig, [], [], None, set())
    f = p.formula()
    t = p.peek()
    if t.kind != "eof":
        raise ParseError(f"unexpected {t.text!r} after formula", t.span)
    if check:
        check_formula(sig, f)
    return f


def parse_theory_file(path) -> TheoryDoc:
    path = Path(path).resolve()
    doc = parse_theory(path.read_text(), str(path), base=path.parent)
    doc.path = str(path)
    return doc


# -- printing --------------------------------------------------------------------


def _num(x) -> str:
    x = float(x)
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _vec(v) -> str:
    return "[" + ", ".join(_vec(e) if isinstance(e, tuple) else _num(e)
                           for e in v) + "]"


def _gsum(pieces) -> str:
    out = []
    for i, (coef, term) in enumerate(pieces):
        mag = abs(coef)
        if term is None:
            body = _num(mag)
        elif mag == 1.0:
            body = pretty_term(term)
        else:
            body = f"{_num(mag)}*{pretty_term(term)}"
        if i == 0:
            out.append(("-" if coef < 0 else "") + body)
        else:
            out.append(("- " if coef < 0 else "+ ") + body)
    return " ".join(out)


def pretty_term(t) -> str:
    if isinstance(t, App):
        return f"{t.func}({', '.join(pretty_term(a) for a in t.args)})"
    return t.name


_LEVEL = {"iff": 1, "implies": 2, "or": 3, "and": 4}


def pretty_formula(f) -> str:
    """Canonical text with minimal parentheses.

    Quantifier bodies extend as far right as possible, so a quantifier
    under a connective is always parenthesized.
    """

    def go(node, need: int) -> str:
        if isinstance(node, Atom):
            if not node.args:
                return node.pred
            return f"{node.pred}({', '.join(pretty_term(a) for a in node.args)})"
        if isinstance(node, Eq):
            return f"{pretty_term(node.lhs)} = {pretty_term(node.rhs)}"
        if isinstance(node, Not):
            return "~" + go(node.body, 5)
        if isinstance(node, Quant):
            groups = ", ".join(g[0] if len(g) == 1 else "(" + ", ".join(g) + ")"
                               for g in node.groups)
            guard = ""
            if node.guard is not None:
                guard = f" [{_gsum(node.guard.lhs)} {node.guard.op} {_gsum(node.guard.rhs)}]"
            body = go(node.body, 0)
            text = f"{node.kind} {groups}{guard}: {body}"
            return f"({text})" if need > 0 else text
        level = _LEVEL[node.op]
        sym = {"iff": "<->", "implies": "->", "or": "|", "and": "&"}[node.op]
        if node.op == "implies":  # right-associative
            text = f"{go(node.lhs, level + 1)} {sym} {go(node.rhs, level)}"
        else:  # left-associative chains
            text = f"{go(node.lhs, level)} {sym} {go(node.rhs, level + 1)}"
        return f"({text})" if level < need else text

    return go(f, 0)


def pretty_statement(s) -> str:
    if isinstance(s, DomainDecl):
        return f"domain {s.name} = {s.dim}"
    if isinstance(s, ConstDecl):
        if not s.trainable:
            return f"const {s.name} : {s.domain} = {_vec(s.init)}"
        out = f"const {s.name} : {s.domain} = train"
        if s.init is not None:
            out += f"({_vec(s.init)})"
        if s.lo is not None or s.hi is not None:
            out += f" in [{_num(s.lo)}, {_num(s.hi)}]"
        return out
    if isinstance(s, VarDecl):
        kind = s.source[0]
        if kind == "inline":
            body = _vec(s.source[1])
        elif kind == "consts":
            body = f"consts({', '.join(s.source[1])})"
        else:
            body = f'data "{s.source[1]}"'
            if s.source[2]:
                body += " cols " + ", ".join(s.source[2])
        return f"var {s.name} : {s.domain} = {body}"
    if isinstance(s, (FuncDecl, PredDecl)):
        impl = s.impl
        if impl[0] == "builtin":
            body = f"builtin {impl[1]}"
        elif impl[0] == "scalar":
            body = "scalar" if impl[1] is None else f"scalar({_num(impl[1])})"
        else:
            acts = ", ".join(a + (f"@{_num(d)}" if d else "")
                             for a, d in zip(impl[2], impl[3]))
            body = f"mlp({', '.join(str(w) for w in impl[1])}; {acts})"
            if impl[0] == "select":
                body = "select " + body
        if isinstance(s, FuncDecl):
            return f"func {s.name} : {', '.join(s.din)} -> {s.dout} = {body}"
        types = f" : {', '.join(s.din)}" if s.din else ""
        return f"pred {s.name}{types} = {body}"
    if isinstance(s, ConfigDecl):
        return f"config {s.key} = {s.value}"
    if isinstance(s, Axiom):
        parts = ["axiom"]
        if s.label is not None:
            parts.append(f'"{s.label}"')
        if s.forall_p is not None:
            parts.append(f"@forall(p={_num(s.forall_p)})")
        if s.exists_p is not None:
            parts.append(f"@exists(p={_num(s.exists_p)})")
        return " ".join(parts) + ": " + pretty_formula(s.formula)
    raise TypeError(f"not a statement: {s!r}")


def pretty_print(doc: TheoryDoc) -> str:
    """Canonical text for a whole theory; reparsing it reproduces the
    same statements (includes come out flattened)."""
    return "\n".join(pretty_statement(s) for s in doc.statements) + "\n"
