"""Text format (``.ksl`` units, ``.krx`` witnesses): lexer, parser and canonical renderer."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .kripke import Interpretation, KripkeModel, ProbabilitySpace, derive_accessibility
from .logic import (
    EQ, SHARED, And, Bottom, Bound, Const, Exists, Forall, Formula, Iff, Implies, Knows, Lit,
    Not, Or, Pred, ProbCmp, ProbLeq, ProbTerm, Signature, Top, Var, alpha_normalize,
    children, format_rational, rebuild,
)
from .search import SearchBounds, Template

KEYWORDS = {"forall", "exists", "true", "false"}


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int, offset: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message, self.line, self.col, self.offset = message, line, col, offset


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT NUMBER ELEM PUNCT EOF
    text: str
    offset: int
    line: int
    col: int


_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<number>[0-9]+)
  | (?P<elem>@[0-9]+)
  | (?P<punct><->|->|<=|>=|\|=|[<>=!&|(){}\[\],;.:/+\-])
""", re.VERBOSE)


def tokenize(text: str) -> list:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1,
                             len(text[:pos].encode()))
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind.upper(), m.group(), len(text[:pos].encode()), line, pos - line_start + 1))
        chunk = m.group()
        if "\n" in chunk:
            line += chunk.count("\n")
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("EOF", "", len(text.encode()), line, pos - line_start + 1))
    return tokens


# ---------------------------------------------------------------------------
# Unit structure
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpecDecl:
    symbols: Optional[frozenset]  # None = whole unit signature
    phi: Formula


@dataclass(frozen=True)
class ContractDecl:
    assume: Formula
    guarantee: Formula


@dataclass(frozen=True)
class CheckDecl:
    kind: str
    name: Optional[str] = None
    left: tuple = ()
    right: tuple = ()
    theory: Optional[str] = None
    pinned: Optional[str] = None
    bounds: tuple = ()  # sorted (key, value) pairs as written
    strict: bool = False
    model: Optional[str] = None
    world: Optional[str] = None


@dataclass
class SourceUnit:
    agents: list = field(default_factory=list)
    symbols: dict = field(default_factory=dict)  # name -> (kind, arity, owner, rigid)
    formulas: dict = field(default_factory=dict)
    theories: dict = field(default_factory=dict)
    specs: dict = field(default_factory=dict)
    contracts: dict = field(default_factory=dict)
    templates: dict = field(default_factory=dict)
    models: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    at: dict = field(default_factory=dict)  # model name -> world

    @property
    def signature(self) -> Signature:
        consts = [n for n, d in self.symbols.items() if d[0] == "const"]
        varz = [n for n, d in self.symbols.items() if d[0] == "var"]
        preds = {n: d[1] for n, d in self.symbols.items() if d[0] == "pred"}
        owner = {n: d[2] for n, d in self.symbols.items()}
        rigid = [n for n, d in self.symbols.items() if d[3]]
        return Signature.build(self.agents, consts, preds, varz, owner, rigid)

    def __eq__(self, other):
        if not isinstance(other, SourceUnit):
            return NotImplemented
        return (sorted(self.agents) == sorted(other.agents) and self.symbols == other.symbols
                and self.formulas == other.formulas and self.theories == other.theories
                and self.specs == other.specs and self.contracts == other.contracts
                and self.templates == other.templates and self.models == other.models
                and self.checks == other.checks and self.at == other.at)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    # helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k=1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        found = tok.text or "end of input"
        return ParseError(f"{msg} (found {found!r})", tok.line, tok.col, tok.offset)

    def at(self, *texts) -> bool:
        return self.tok.kind in ("PUNCT", "IDENT") and self.tok.text in texts

    def accept(self, text) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text) -> Token:
        if not self.at(text):
            raise self.error(f"expected {text!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self, what="identifier") -> str:
        if self.tok.kind != "IDENT":
            raise self.error(f"expected {what}")
        t = self.tok
        self.i += 1
        return t.text

    def number(self) -> int:
        if self.tok.kind != "NUMBER":
            raise self.error("expected a number")
        t = self.tok
        self.i += 1
        return int(t.text)

    def rational(self) -> Fraction:
        neg = self.accept("-")
        num = self.number()
        den = 1
        if self.accept("/"):
            tok = self.tok
            den = self.number()
            if den == 0:
                raise self.error("zero denominator", tok)
        q = Fraction(num, den)
        return -q if neg else q

    def element(self) -> int:
        if self.tok.kind != "ELEM":
            raise self.error("expected a domain element like @0")
        t = self.tok
        self.i += 1
        return int(t.text[1:])

    # formulas --------------------------------------------------------------

    def formula(self, scope=frozenset()):
        left = self.imp(scope)
        while self.accept("<->"):
            left = Iff(left, self.imp(scope))
        return left

    def imp(self, scope):
        left = self.or_(scope)
        if self.accept("->"):
            return Implies(left, self.imp(scope))
        return left

    def or_(self, scope):
        left = self.and_(scope)
        while self.accept("|"):
            left = Or(left, self.and_(scope))
        return left

    def and_(self, scope):
        left = self.unary(scope)
        while self.accept("&"):
            left = And(left, self.unary(scope))
        return left

    def unary(self, scope):
        if self.accept("!"):
            return Not(self.unary(scope))
        if self.tok.kind == "IDENT" and self.tok.text == "K" and self.peek().text == "[":
            self.i += 2
            agent = self.ident("agent name")
            self.expect("]")
            return Knows(agent, self.unary(scope))
        if self.tok.kind == "IDENT" and self.tok.text in ("forall", "exists"):
            kind = Forall if self.tok.text == "forall" else Exists
            self.i += 1
            var = self.ident("variable name")
            self.expect(".")
            return kind(var, self.formula(scope | {var}))
        return self.atom(scope)

    def _starts_prob(self) -> bool:
        t = self.tok
        if t.kind == "NUMBER" or (t.kind == "PUNCT" and t.text == "-"):
            return True
        return t.kind == "IDENT" and t.text == "Pr" and self.peek().text in ("{", "[")

    def atom(self, scope):
        if self._starts_prob():
            return self.probatom(scope)
        if self.accept("("):
            f = self.formula(scope)
            self.expect(")")
            return f
        if self.accept("true"):
            return Top()
        if self.accept("false"):
            return Bottom()
        if self.tok.kind != "IDENT":
            raise self.error("expected a formula")
        name = self.ident()
        args = []
        if self.accept("("):
            args.append(self.term(scope))
            while self.accept(","):
                args.append(self.term(scope))
            self.expect(")")
        return Pred(name, tuple(args))

    def term(self, scope):
        if self.tok.kind == "ELEM":
            raise self.error("domain elements are not allowed in formulas")
        name = self.ident("term")
        return Bound(name) if name in scope else Const(name)

    def probterm(self, scope, coef):
        self.expect("Pr")
        agent = SHARED
        if self.accept("["):
            agent = self.ident("agent name")
            self.expect("]")
        self.expect("{")
        body = self.formula(scope)
        self.expect("}")
        return ProbTerm(coef, agent, body)

    def coef(self):
        if self.tok.kind == "NUMBER" or self.at("-"):
            return self.rational()
        return Fraction(1)

    def probatom(self, scope):
        terms = [self.probterm(scope, self.coef())]
        while self.at("+", "-"):
            sign = -1 if self.tok.text == "-" else 1
            self.i += 1
            terms.append(self.probterm(scope, sign * self.coef()))
        if not self.at("<=", "<", ">=", ">", "="):
            raise self.error("expected a comparison <=, <, >=, > or =")
        rel = self.tok.text
        self.i += 1
        bound = self.rational()
        if rel == "<=":
            return ProbLeq(tuple(terms), bound)
        return ProbCmp(tuple(terms), rel, bound)

    # declarations ------------------------------------------------------------

    def unit(self) -> SourceUnit:
        u = SourceUnit()
        self.unit_ = u
        self.last_model = None
        self.pending_models = []
        while self.tok.kind != "EOF":
            kw = self.tok
            if kw.kind != "IDENT":
                raise self.error("expected a declaration")
            handler = getattr(self, f"decl_{kw.text}", None)
            if handler is None:
                raise self.error("unknown declaration keyword")
            self.i += 1
            handler(u)
        return u

    def _unique(self, table, name, tok, what):
        if name in table:
            raise ParseError(f"duplicate {what} {name!r}", tok.line, tok.col, tok.offset)

    def decl_agents(self, u):
        self.expect("{")
        if not self.at("}"):
            u.agents.append(self.ident("agent name"))
            while self.accept(","):
                u.agents.append(self.ident("agent name"))
        self.expect("}")

    def decl_symbols(self, u):
        if self.accept("shared"):
            owner = SHARED
        else:
            self.expect("owner")
            self.expect("=")
            owner = self.ident("agent name")
        self.expect("{")
        while not self.accept("}"):
            kind_tok = self.tok
            kind = self.ident("symbol kind")
            if kind not in ("var", "const", "pred"):
                raise self.error("expected var, const or pred", kind_tok)
            name_tok = self.tok
            name = self.ident("symbol name")
            self._unique(u.symbols, name, name_tok, "symbol")
            if name in KEYWORDS or name in ("K", "Pr", EQ):
                raise ParseError(f"reserved name {name!r}", name_tok.line, name_tok.col, name_tok.offset)
            arity, rigid = 0, False
            if kind == "pred":
                self.expect("/")
                arity = self.number()
                rigid = self.accept("rigid")
            u.symbols[name] = (kind, arity, owner, rigid)
            self.expect(";")

    def _named_block_start(self, table, what):
        tok = self.tok
        name = self.ident(f"{what} name")
        self._unique(table, name, tok, what)
        self.expect("{")
        return name

    def decl_formula(self, u):
        name = self._named_block_start(u.formulas, "formula")
        u.formulas[name] = self.formula()
        self.accept(";")
        self.expect("}")

    def decl_theory(self, u):
        name = self._named_block_start(u.theories, "theory")
        items = []
        while not self.accept("}"):
            items.append(self.formula())
            self.expect(";")
        u.theories[name] = tuple(items)

    def decl_spec(self, u):
        name = self._named_block_start(u.specs, "spec")
        symbols = None
        if self.accept("sig"):
            self.expect(":")
            if not self.accept("all"):
                self.expect("{")
                names = []
                if not self.at("}"):
                    names.append(self.ident("symbol name"))
                    while self.accept(","):
                        names.append(self.ident("symbol name"))
                self.expect("}")
                symbols = frozenset(names)
            self.expect(";")
        self.expect("phi")
        self.expect(":")
        phi = self.formula()
        self.accept(";")
        self.expect("}")
        u.specs[name] = SpecDecl(symbols, phi)

    def decl_contract(self, u):
        name = self._named_block_start(u.contracts, "contract")
        self.expect("assume")
        self.expect(":")
        a = self.formula()
        self.expect(";")
        self.expect("guarantee")
        self.expect(":")
        g = self.formula()
        self.accept(";")
        self.expect("}")
        u.contracts[name] = ContractDecl(a, g)

    def tuple_set(self):
        self.expect("{")
        rows = set()
        while not self.at("}"):
            self.expect("(")
            row = []
            if not self.at(")"):
                row.append(self.element())
                while self.accept(","):
                    row.append(self.element())
            self.expect(")")
            rows.add(tuple(row))
            if not self.accept(","):
                break
        self.expect("}")
        return frozenset(rows)

    def assignment(self, target: dict):
        tok = self.tok
        name = self.ident("symbol name")
        if name in target:
            raise ParseError(f"{name!r} assigned twice", tok.line, tok.col, tok.offset)
        self.expect("=")
        target[name] = (tok, self.element() if self.tok.kind == "ELEM" else self.tuple_set())
        self.expect(";")

    def sample_mode(self) -> str:
        mode = self.ident("sample mode")
        if mode == "cell":
            self.expect(":")
            return f"cell:{self.ident('agent name')}"
        if mode not in ("full", "free"):
            raise self.error("expected full, free or cell:AGENT")
        return mode

    def decl_template(self, u):
        name = self._named_block_start(u.templates, "template")
        size, assigns, access, sample = None, {}, None, None
        while not self.accept("}"):
            if self.accept("domain"):
                size = self.number()
                self.expect(";")
            elif self.accept("access"):
                access = self.ident("access mode")
                if access not in ("derived", "free_s5"):
                    raise self.error("expected derived or free_s5")
                self.expect(";")
            elif self.accept("sample"):
                sample = self.sample_mode()
                self.expect(";")
            else:
                self.assignment(assigns)
        consts = {k: v for k, (_, v) in assigns.items() if isinstance(v, int)}
        preds = {k: v for k, (_, v) in assigns.items() if not isinstance(v, int)}
        u.templates[name] = Template(size, consts, preds, access, sample)

    def decl_model(self, u):
        name_tok = self.tok
        name = self._named_block_start(u.models, "model")
        worlds, size = [], None
        common: dict = {}
        per_world: dict = {}
        access_rows: dict = {}
        derived = False
        prob: dict = {}
        while not self.accept("}"):
            if self.accept("worlds"):
                worlds.append(self.ident("world name"))
                while self.accept(","):
                    worlds.append(self.ident("world name"))
                self.expect(";")
            elif self.accept("domain"):
                size = self.number()
                self.expect(";")
            elif self.accept("world"):
                wtok = self.tok
                w = self.ident("world name")
                self._unique(per_world, w, wtok, "world block")
                self.expect("{")
                per_world[w] = {}
                while not self.accept("}"):
                    self.assignment(per_world[w])
            elif self.accept("access"):
                if self.accept("derived"):
                    derived = True
                else:
                    a = self.ident("agent name")
                    self.expect("=")
                    self.expect("{")
                    rows = set()
                    while not self.at("}"):
                        self.expect("(")
                        x = self.ident("world name")
                        self.expect(",")
                        y = self.ident("world name")
                        self.expect(")")
                        rows.add((x, y))
                        if not self.accept(","):
                            break
                    self.expect("}")
                    access_rows[a] = frozenset(rows)
                self.expect(";")
            elif self.accept("prob"):
                wtok = self.tok
                w = self.ident("world name")
                self._unique(prob, w, wtok, "prob block")
                self.expect("{")
                self.expect("sample")
                self.expect("{")
                sample = []
                if not self.at("}"):
                    sample.append(self.ident("world name"))
                    while self.accept(","):
                        sample.append(self.ident("world name"))
                self.expect("}")
                self.expect(";")
                weights = {}
                while not self.accept("}"):
                    v = self.ident("world name")
                    self.expect(":")
                    weights[v] = self.rational()
                    self.expect(";")
                prob[w] = ProbabilitySpace(frozenset(sample), weights)
            else:
                self.assignment(common)
        if size is None:
            raise ParseError("model needs a 'domain' line", name_tok.line, name_tok.col, name_tok.offset)
        u.models[name] = (worlds, size, common, per_world, derived, access_rows, prob, name_tok)
        self.last_model = name

    def decl_at(self, u):
        tok = self.tok
        w = self.ident("world name")
        if self.last_model is None:
            raise ParseError("'at' needs a preceding model", tok.line, tok.col, tok.offset)
        u.at[self.last_model] = w
        self.accept(";")

    def name_list(self):
        names = [self.ident()]
        while self.accept(","):
            names.append(self.ident())
        return tuple(names)

    def decl_check(self, u):
        name = None
        if self.tok.kind == "IDENT" and self.peek().text == ":":
            name = self.ident()
            self.i += 1
        kind_tok = self.tok
        kind = self.ident("check kind")
        fields: dict = {}
        if kind in ("decomposition", "spec_refinement", "contract_refinement"):
            fields["left"] = (self.ident(),)
            self.expect("<=")
            fields["right"] = self.name_list()
        elif kind in ("entailment", "implementation"):
            fields["left"] = () if self.at("|=") else self.name_list()
            self.expect("|=")
            fields["right"] = (self.ident(),)
        elif kind in ("holds", "refutes"):
            fields["model"] = self.ident("model name")
            self.expect("at")
            fields["world"] = self.ident("world name")
            if kind == "holds":
                fields["right"] = (self.ident("formula name"),)
            else:
                self.expect("decomposition")
                fields["left"] = (self.ident(),)
                self.expect("<=")
                fields["right"] = self.name_list()
        else:
            raise self.error("unknown check kind", kind_tok)
        while True:
            if self.accept("theory"):
                fields["theory"] = self.ident("theory name")
            elif self.accept("pinned"):
                fields["pinned"] = self.ident("template name")
            elif self.accept("strict"):
                fields["strict"] = True
            elif self.accept("bounds"):
                self.expect("(")
                items = []
                while not self.at(")"):
                    key = self.ident("bound name")
                    self.expect("=")
                    if self.tok.kind == "NUMBER":
                        val = str(self.number())
                    elif self.at("cell") and self.peek().text == ":":
                        val = self.sample_mode()
                    else:
                        val = self.ident("bound value")
                    items.append((key, val))
                    if not self.accept(","):
                        break
                self.expect(")")
                fields["bounds"] = tuple(items)
            else:
                break
        self.accept(";")
        u.checks.append(CheckDecl(kind, name, **fields))


def _resolve(f: Formula, sig: Signature) -> Formula:
    def walk(g):
        if isinstance(g, Pred):
            return Pred(g.name, tuple(Var(t.name) if isinstance(t, Const) and t.name in sig.state_variables
                                      else t for t in g.args))
        kids = children(g)
        return rebuild(g, tuple(walk(k) for k in kids)) if kids else g

    return alpha_normalize(walk(f), sig.symbols())


def _build_model(raw, sig: Signature) -> KripkeModel:
    worlds, size, common, per_world, derived, access_rows, prob, tok = raw
    for w in per_world:
        if w not in worlds:
            t = tok
            raise ParseError(f"world block for undeclared world {w!r}", t.line, t.col, t.offset)
    interps = {}
    for w in worlds:
        consts, vars_, preds = {}, {}, {}
        for name, (t, value) in list(common.items()) + list(per_world.get(w, {}).items()):
            cat = sig.category(name)
            if cat is None:
                raise ParseError(f"unknown symbol {name!r}", t.line, t.col, t.offset)
            if (cat == "pred") != (not isinstance(value, int)):
                raise ParseError(f"wrong kind of value for {name!r}", t.line, t.col, t.offset)
            {"const": consts, "var": vars_, "pred": preds}[cat][name] = value
        for p in sig.predicates:
            if p != EQ:
                preds.setdefault(p, frozenset())
        interps[w] = Interpretation(consts, vars_, preds)
    access = derive_accessibility(interps, sig) if derived else dict(access_rows)
    return KripkeModel(tuple(worlds), frozenset(sig.agents), size, access, prob, interps, sig,
                       derived_access=derived)


def parse_unit(text: str) -> SourceUnit:
    """Parse a unit; raises :class:`ParseError` with line/column on failure."""
    p = _Parser(text)
    u = p.unit()
    sig = u.signature
    u.formulas = {k: _resolve(f, sig) for k, f in u.formulas.items()}
    u.theories = {k: tuple(_resolve(f, sig) for f in fs) for k, fs in u.theories.items()}
    u.specs = {k: SpecDecl(s.symbols, _resolve(s.phi, sig)) for k, s in u.specs.items()}
    u.contracts = {k: ContractDecl(_resolve(c.assume, sig), _resolve(c.guarantee, sig))
                   for k, c in u.contracts.items()}
    u.models = {k: _build_model(raw, sig) for k, raw in u.models.items()}
    return u


def parse_formula(text: str, sig: Optional[Signature] = None) -> Formula:
    p = _Parser(text)
    f = p.formula()
    if p.tok.kind != "EOF":
        raise p.error("unexpected trailing input")
    return _resolve(f, sig) if sig is not None else f


def bounds_from(items, base: SearchBounds = SearchBounds()) -> SearchBounds:
    """SearchBounds from ``bounds(...)`` key/value pairs."""
    kw = {}
    for key, val in items:
        if key == "worlds":
            kw["max_worlds"] = int(val)
        elif key == "anon":
            kw["max_anon"] = int(val)
        elif key == "access":
            kw["access"] = val
        elif key == "sample":
            kw["sample"] = val
        elif key == "timeout_ms":
            kw["timeout"] = int(val) / 1000
        else:
            raise ValueError(f"unknown bound {key!r}")
    from dataclasses import replace
    return replace(base, **kw)


# ---------------------------------------------------------------------------
# Renderer
# ---------------------------------------------------------------------------

_PREC = {Iff: 1, Implies: 2, Or: 3, And: 4}


def _prec(f) -> int:
    if isinstance(f, (Forall, Exists)):
        return 0
    if type(f) in _PREC:
        return _PREC[type(f)]
    if isinstance(f, (Not, Knows)):
        return 5
    return 6


def render_term(t) -> str:
    if isinstance(t, Lit):
        return f"@{t.index}"
    return t.name


def _render_prob(f) -> str:
    parts = []
    for i, t in enumerate(f.terms):
        tag = f"[{t.agent}]" if t.agent is not SHARED else ""
        text = f"Pr{tag}{{{render_formula(t.body)}}}"
        if t.coef != 1:
            text = f"{format_rational(t.coef)} {text}"
        parts.append(text)
    rel = f.rel if isinstance(f, ProbCmp) else "<="
    return f"{' + '.join(parts)} {rel} {format_rational(f.bound)}"


def render_formula(f: Formula, ctx: int = 0) -> str:
    if isinstance(f, (Forall, Exists)):
        kw = "forall" if isinstance(f, Forall) else "exists"
        text = f"{kw} {f.var}. {render_formula(f.body, 0)}"
    elif isinstance(f, Iff):
        text = f"{render_formula(f.left, 1)} <-> {render_formula(f.right, 2)}"
    elif isinstance(f, Implies):
        text = f"{render_formula(f.left, 3)} -> {render_formula(f.right, 2)}"
    elif isinstance(f, Or):
        text = f"{render_formula(f.left, 3)} | {render_formula(f.right, 4)}"
    elif isinstance(f, And):
        text = f"{render_formula(f.left, 4)} & {render_formula(f.right, 5)}"
    elif isinstance(f, (Not, Knows)):
        inner = render_formula(f.body, 5)
        if isinstance(f.body, (ProbLeq, ProbCmp)):
            inner = f"({inner})"
        prefix = "!" if isinstance(f, Not) else f"K[{f.agent}] "
        text = prefix + inner
    elif isinstance(f, (ProbLeq, ProbCmp)):
        text = _render_prob(f)
    elif isinstance(f, Pred):
        text = f.name if not f.args else f"{f.name}({', '.join(render_term(t) for t in f.args)})"
    elif isinstance(f, Top):
        text = "true"
    elif isinstance(f, Bottom):
        text = "false"
    else:  # pragma: no cover
        raise TypeError(type(f).__name__)
    if _prec(f) < ctx or (_prec(f) == 0 and ctx > 0):
        return f"({text})"
    return text


def _render_rows(rows) -> str:
    inner = ", ".join("(" + ", ".join(f"@{d}" for d in row) + ")" for row in sorted(rows))
    return "{" + inner + "}"


def render_symbols(u_or_sig) -> list:
    sig = u_or_sig if isinstance(u_or_sig, Signature) else u_or_sig.signature
    lines = [f"agents {{ {', '.join(sorted(sig.agents))} }}" if sig.agents else "agents { }"]
    owners = sorted({sig.owner.get(s) for s in sig.symbols() if s != EQ}, key=lambda o: (o is not None, o or ""))
    for owner in owners:
        head = "symbols shared {" if owner is None else f"symbols owner={owner} {{"
        lines.append(head)
        for s in sorted(x for x in sig.symbols() if x != EQ and sig.owner.get(x) == owner):
            cat = sig.category(s)
            if cat == "pred":
                lines.append(f"  pred {s}/{sig.predicates[s]}{' rigid' if s in sig.rigid else ''};")
            else:
                lines.append(f"  {cat} {s};")
        lines.append("}")
    return lines


def render_model(name: str, m: KripkeModel) -> list:
    sig = m.signature
    lines = [f"model {name} {{", f"  worlds {', '.join(m.worlds)};", f"  domain {m.domain_size};"]
    first = m.interp[m.worlds[0]] if m.worlds else Interpretation()
    shared = []
    for c in sorted(sig.constants):
        if c in first.consts and all(m.interp[w].consts.get(c) == first.consts[c] for w in m.worlds):
            shared.append(c)
            lines.append(f"  {c} = @{first.consts[c]};")
    for p in sorted(sig.rigid - {EQ}):
        if p in first.preds and all(m.interp[w].preds.get(p) == first.preds[p] for w in m.worlds):
            shared.append(p)
            lines.append(f"  {p} = {_render_rows(first.preds[p])};")
    for w in m.worlds:
        it = m.interp[w]
        body = []
        for c in sorted(set(it.consts) - set(shared)):
            body.append(f"{c} = @{it.consts[c]};")
        for x in sorted(it.vars):
            body.append(f"{x} = @{it.vars[x]};")
        for p in sorted(set(it.preds) - set(shared)):
            body.append(f"{p} = {_render_rows(it.preds[p])};")
        lines.append(f"  world {w} {{ {' '.join(body)} }}" if body else f"  world {w} {{ }}")
    if m.derived_access:
        lines.append("  access derived;")
    else:
        for a in sorted(m.access):
            rows = ", ".join(f"({x}, {y})" for x, y in sorted(m.access[a]))
            lines.append(f"  access {a} = {{{rows}}};")
    for w in m.worlds:
        if w not in m.prob:
            continue
        ps = m.prob[w]
        order = [v for v in m.worlds if v in ps.sample] + sorted(ps.sample - set(m.worlds))
        weights = " ".join(f"{v}: {format_rational(ps.weights[v])};" for v in order if v in ps.weights)
        lines.append(f"  prob {w} {{ sample {{{', '.join(order)}}}; {weights} }}")
    lines.append("}")
    return lines


def _render_check(c: CheckDecl) -> str:
    head = f"check {c.name}: {c.kind}" if c.name else f"check {c.kind}"
    if c.kind in ("decomposition", "spec_refinement", "contract_refinement"):
        body = f"{c.left[0]} <= {', '.join(c.right)}"
    elif c.kind in ("entailment", "implementation"):
        body = f"{', '.join(c.left)} |= {c.right[0]}" if c.left else f"|= {c.right[0]}"
    elif c.kind == "holds":
        body = f"{c.model} at {c.world} {c.right[0]}"
    else:
        body = f"{c.model} at {c.world} decomposition {c.left[0]} <= {', '.join(c.right)}"
    tail = ""
    if c.theory:
        tail += f" theory {c.theory}"
    if c.pinned:
        tail += f" pinned {c.pinned}"
    if c.bounds:
        tail += " bounds(" + ", ".join(f"{k}={v}" for k, v in c.bounds) + ")"
    if c.strict:
        tail += " strict"
    return f"{head} {body}{tail};"


def render_unit(u: SourceUnit) -> str:
    """Deterministic canonical text for a unit."""
    lines = render_symbols(u)
    for name in sorted(u.formulas):
        lines.append(f"formula {name} {{ {render_formula(u.formulas[name])} }}")
    for name in sorted(u.theories):
        lines.append(f"theory {name} {{")
        lines.extend(f"  {render_formula(f)};" for f in u.theories[name])
        lines.append("}")
    for name in sorted(u.specs):
        s = u.specs[name]
        sig = "all" if s.symbols is None else "{" + ", ".join(sorted(s.symbols)) + "}"
        lines.append(f"spec {name} {{ sig: {sig}; phi: {render_formula(s.phi)} }}")
    for name in sorted(u.contracts):
        c = u.contracts[name]
        lines.append(f"contract {name} {{")
        lines.append(f"  assume: {render_formula(c.assume)};")
        lines.append(f"  guarantee: {render_formula(c.guarantee)}")
        lines.append("}")
    for name in sorted(u.templates):
        t = u.templates[name]
        lines.append(f"template {name} {{")
        if t.domain_size is not None:
            lines.append(f"  domain {t.domain_size};")
        for c in sorted(t.consts):
            lines.append(f"  {c} = @{t.consts[c]};")
        for p in sorted(t.preds):
            lines.append(f"  {p} = {_render_rows(t.preds[p])};")
        if t.access:
            lines.append(f"  access {t.access};")
        if t.sample:
            lines.append(f"  sample {t.sample};")
        lines.append("}")
    for name in sorted(u.models):
        lines.extend(render_model(name, u.models[name]))
        if name in u.at:
            lines.append(f"at {u.at[name]}")
    for c in u.checks:
        lines.append(_render_check(c))
    return "\n".join(lines) + "\n"


def witness_unit(m: KripkeModel, world: str, name: str = "Witness") -> str:
    """Self-contained ``.krx`` text: signature, model and the pointed world."""
    lines = render_symbols(m.signature) + render_model(name, m) + [f"at {world}"]
    return "\n".join(lines) + "\n"
