"""Abstract syntax and structural operations for the knowledge/probability language.

Formulas are immutable, hashable trees. The *core* connectives are
``Pred``, ``Not``, ``And``, ``Forall``, ``Knows``, ``ProbLeq`` and the constant
``Top``; everything else (``Or``, ``Implies``, ``Iff``, ``Exists``, ``Bottom``,
``ProbCmp``) is surface sugar that :func:`expand_derived` rewrites into the core.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Mapping, Optional, Sequence, Union

EQ = "eq"
SHARED = None  # owner / probability tag meaning "common to all agents"


def rational(value: Union[int, str, Fraction]) -> Fraction:
    """Exact rational from an int, a ``"p/q"`` string or a Fraction."""
    if isinstance(value, float):
        raise TypeError("floating point values are not accepted; use a string like '99/100'")
    return Fraction(value)


def format_rational(q: Fraction) -> str:
    q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


# ---------------------------------------------------------------------------
# Signatures
# ---------------------------------------------------------------------------


class SignatureClash(ValueError):
    """Two signatures declare the same symbol incompatibly."""

    def __init__(self, symbol: str, reason: str):
        super().__init__(f"symbol {symbol!r}: {reason}")
        self.symbol = symbol


@dataclass(frozen=True)
class Signature:
    agents: frozenset = frozenset()
    constants: frozenset = frozenset()
    predicates: Mapping[str, int] = field(default_factory=dict)
    state_variables: frozenset = frozenset()
    owner: Mapping[str, Optional[str]] = field(default_factory=dict)
    rigid: frozenset = frozenset()

    @classmethod
    def build(cls, agents=(), constants=(), predicates=None, state_variables=(),
              owner=None, rigid=()) -> "Signature":
        preds = dict(predicates or {})
        preds[EQ] = 2
        own = dict(owner or {})
        own[EQ] = SHARED
        for name in list(constants) + list(preds) + list(state_variables):
            own.setdefault(name, SHARED)
        return cls(frozenset(agents), frozenset(constants), preds,
                   frozenset(state_variables), own, frozenset(rigid) | {EQ})

    def category(self, name: str) -> Optional[str]:
        if name in self.constants:
            return "const"
        if name in self.predicates:
            return "pred"
        if name in self.state_variables:
            return "var"
        return None

    def symbols(self) -> set:
        return set(self.constants) | set(self.predicates) | set(self.state_variables)

    def owned_by(self, agent: str) -> set:
        """Symbols in the agent's internal world model (own symbols plus shared ones)."""
        return {s for s in self.symbols() if self.owner.get(s) in (agent, SHARED)}

    def is_world_dependent(self, name: str) -> bool:
        if name in self.constants:
            return False
        if name in self.predicates:
            return name not in self.rigid
        return name in self.state_variables

    def signature_key(self, name: str) -> tuple:
        cat = self.category(name)
        return (cat, self.predicates.get(name), self.owner.get(name), name in self.rigid)

    def union(self, other: "Signature") -> "Signature":
        for name in self.symbols() & other.symbols():
            if self.signature_key(name) != other.signature_key(name):
                a, b = self.signature_key(name), other.signature_key(name)
                if a[0] != b[0]:
                    reason = f"declared as {a[0]} and as {b[0]}"
                elif a[1] != b[1]:
                    reason = f"arity {a[1]} vs {b[1]}"
                elif a[2] != b[2]:
                    reason = f"owner {a[2] or 'shared'} vs {b[2] or 'shared'}"
                else:
                    reason = "rigid in one signature only"
                raise SignatureClash(name, reason)
        return Signature(
            self.agents | other.agents,
            self.constants | other.constants,
            {**self.predicates, **other.predicates},
            self.state_variables | other.state_variables,
            {**self.owner, **other.owner},
            self.rigid | other.rigid,
        )

    def contains(self, other: "Signature") -> bool:
        """True iff ``other`` is a sub-signature of ``self``."""
        if not other.agents <= self.agents:
            return False
        for name in other.symbols():
            if self.category(name) is None or self.signature_key(name) != other.signature_key(name):
                return False
        return True

    def restrict(self, names) -> "Signature":
        names = set(names) | {EQ}
        missing = names - self.symbols()
        if missing:
            raise KeyError(f"unknown symbols: {sorted(missing)}")
        return Signature(
            self.agents,
            self.constants & names,
            {p: k for p, k in self.predicates.items() if p in names},
            self.state_variables & names,
            {s: o for s, o in self.owner.items() if s in names},
            self.rigid & names,
        )


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Var:
    """World-dependent state variable."""

    name: str


@dataclass(frozen=True)
class Bound:
    """Quantifier-bound variable."""

    name: str


@dataclass(frozen=True)
class Lit:
    """Domain element ``@index``; only produced by evaluation and reports."""

    index: int


Term = Union[Const, Var, Bound, Lit]


# ---------------------------------------------------------------------------
# Formulas
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Top:
    pass


@dataclass(frozen=True)
class Pred:
    name: str
    args: tuple = ()


@dataclass(frozen=True)
class Not:
    body: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Forall:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class Knows:
    agent: str
    body: "Formula"


@dataclass(frozen=True)
class ProbTerm:
    coef: Fraction
    agent: Optional[str]
    body: "Formula"


@dataclass(frozen=True)
class ProbLeq:
    """``sum_i coef_i * Pr_{agent_i}{body_i} <= bound``."""

    terms: tuple
    bound: Fraction


# surface sugar -------------------------------------------------------------


@dataclass(frozen=True)
class Bottom:
    pass


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Iff:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Exists:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class ProbCmp:
    """Linear probability comparison with relation ``<``, ``>=``, ``>`` or ``=``."""

    terms: tuple
    rel: str
    bound: Fraction


Formula = Union[Top, Pred, Not, And, Forall, Knows, ProbLeq,
                Bottom, Or, Implies, Iff, Exists, ProbCmp]

CORE_TYPES = (Top, Pred, Not, And, Forall, Knows, ProbLeq)
BINARY_TYPES = (And, Or, Implies, Iff)
BINDER_TYPES = (Forall, Exists)
PROB_TYPES = (ProbLeq, ProbCmp)
TRUE = Top()
FALSE = Bottom()


def pred(name: str, *args: Term) -> Pred:
    return Pred(name, tuple(args))


def conj(*fs: Formula) -> Formula:
    if not fs:
        return TRUE
    out = fs[0]
    for f in fs[1:]:
        out = And(out, f)
    return out


def disj(*fs: Formula) -> Formula:
    if not fs:
        return FALSE
    out = fs[0]
    for f in fs[1:]:
        out = Or(out, f)
    return out


def prob(body: Formula, coef=1, agent: Optional[str] = SHARED) -> ProbTerm:
    return ProbTerm(rational(coef), agent, body)


def prob_cmp(terms: Sequence[ProbTerm], rel: str, bound) -> Formula:
    bound = rational(bound)
    if rel == "<=":
        return ProbLeq(tuple(terms), bound)
    if rel not in ("<", ">=", ">", "="):
        raise ValueError(f"unknown relation {rel!r}")
    return ProbCmp(tuple(terms), rel, bound)


def children(f: Formula) -> tuple:
    if isinstance(f, (Not, Knows, Forall, Exists)):
        return (f.body,)
    if isinstance(f, BINARY_TYPES):
        return (f.left, f.right)
    if isinstance(f, PROB_TYPES):
        return tuple(t.body for t in f.terms)
    return ()


def rebuild(f: Formula, kids: Sequence[Formula]) -> Formula:
    """Same node as ``f`` with its children replaced."""
    if isinstance(f, Not):
        return Not(kids[0])
    if isinstance(f, (Knows,)):
        return Knows(f.agent, kids[0])
    if isinstance(f, Forall):
        return Forall(f.var, kids[0])
    if isinstance(f, Exists):
        return Exists(f.var, kids[0])
    if isinstance(f, BINARY_TYPES):
        return type(f)(kids[0], kids[1])
    if isinstance(f, ProbLeq):
        return ProbLeq(tuple(ProbTerm(t.coef, t.agent, k) for t, k in zip(f.terms, kids)), f.bound)
    if isinstance(f, ProbCmp):
        return ProbCmp(tuple(ProbTerm(t.coef, t.agent, k) for t, k in zip(f.terms, kids)), f.rel, f.bound)
    return f


# ---------------------------------------------------------------------------
# Structural operations
# ---------------------------------------------------------------------------


def subformulas(f: Formula) -> list:
    """Every node of the syntax tree, children (left to right) before parents."""
    out: list = []

    def walk(g):
        for k in children(g):
            walk(k)
        out.append(g)

    walk(f)
    return out


def free_variables(f: Formula) -> set:
    names: set = set()
    for g in subformulas(f):
        if isinstance(g, Pred):
            names.update(t.name for t in g.args if isinstance(t, Var))
    return names


def substitute(f: Formula, name: str, value: Lit) -> Formula:
    """Replace the bound variable ``name`` by a domain literal."""
    if isinstance(f, Pred):
        if not any(isinstance(t, Bound) and t.name == name for t in f.args):
            return f
        return Pred(f.name, tuple(value if isinstance(t, Bound) and t.name == name else t
                                  for t in f.args))
    if isinstance(f, BINDER_TYPES) and f.var == name:
        return f
    kids = children(f)
    if not kids:
        return f
    new = tuple(substitute(k, name, value) for k in kids)
    if all(a is b for a, b in zip(new, kids)):
        return f
    return rebuild(f, new)


def _negate_terms(terms) -> tuple:
    return tuple(ProbTerm(-t.coef, t.agent, t.body) for t in terms)


def expand_derived(f: Formula) -> Formula:
    """Rewrite surface sugar into the core connectives."""
    kids = tuple(expand_derived(k) for k in children(f))
    if isinstance(f, Bottom):
        return Not(TRUE)
    if isinstance(f, Or):
        return Not(And(Not(kids[0]), Not(kids[1])))
    if isinstance(f, Implies):
        return Not(And(kids[0], Not(kids[1])))
    if isinstance(f, Iff):
        a, b = kids
        return And(Not(And(a, Not(b))), Not(And(b, Not(a))))
    if isinstance(f, Exists):
        return Not(Forall(f.var, Not(kids[0])))
    if isinstance(f, ProbCmp):
        terms = tuple(ProbTerm(t.coef, t.agent, k) for t, k in zip(f.terms, kids))
        leq = ProbLeq(terms, f.bound)
        geq = ProbLeq(_negate_terms(terms), -f.bound)
        if f.rel == ">=":
            return geq
        if f.rel == ">":
            return Not(leq)
        if f.rel == "<":
            return Not(geq)
        return And(leq, geq)  # "="
    if not kids:
        return f
    return rebuild(f, kids)


def is_core(f: Formula) -> bool:
    return all(isinstance(g, CORE_TYPES) for g in subformulas(f))


def agents_in(f: Formula) -> set:
    """Agents of knowledge modalities occurring in ``f``."""
    return {g.agent for g in subformulas(f) if isinstance(g, Knows)}


def prob_atoms(f: Formula) -> list:
    return [g for g in subformulas(f) if isinstance(g, PROB_TYPES)]


# ---------------------------------------------------------------------------
# Well-formedness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    severity: str = "error"

    def __str__(self) -> str:
        return f"{self.severity}: {self.code}: {self.message}"


def well_formed(f: Formula, sig: Signature) -> list:
    """Violations of the grammar side conditions; empty when ``f`` is well formed."""
    diags: list = []
    bound_names: set = set()
    free_names: set = set()

    def term_ok(t, scope):
        if isinstance(t, Lit):
            return
        if isinstance(t, Bound):
            if t.name not in scope:
                diags.append(Diagnostic("unbound variable", f"{t.name} is not bound here"))
            return
        if isinstance(t, Var):
            free_names.add(t.name)
        expected = "var" if isinstance(t, Var) else "const"
        cat = sig.category(t.name)
        if cat is None:
            diags.append(Diagnostic("unknown symbol", f"{t.name} is not declared"))
        elif cat != expected:
            diags.append(Diagnostic("category mismatch", f"{t.name} is a {cat}, used as {expected}"))

    def agent_ok(a):
        if a is not SHARED and a not in sig.agents:
            diags.append(Diagnostic("unknown agent", f"agent {a} is not declared"))

    def walk(g, scope):
        if isinstance(g, Pred):
            if g.name not in sig.predicates:
                diags.append(Diagnostic("unknown symbol", f"predicate {g.name} is not declared"))
            elif sig.predicates[g.name] != len(g.args):
                diags.append(Diagnostic(
                    "arity mismatch",
                    f"{g.name} has arity {sig.predicates[g.name]}, applied to {len(g.args)} terms"))
            for t in g.args:
                term_ok(t, scope)
            return
        if isinstance(g, BINDER_TYPES):
            bound_names.add(g.var)
            walk(g.body, scope | {g.var})
            return
        if isinstance(g, Knows):
            agent_ok(g.agent)
        if isinstance(g, PROB_TYPES):
            if not g.terms:
                diags.append(Diagnostic("empty probability atom", "at least one term is required"))
            for t in g.terms:
                agent_ok(t.agent)
        for k in children(g):
            walk(k, scope)

    walk(f, frozenset())
    clash = bound_names & (free_names | sig.symbols())
    for name in sorted(clash):
        diags.append(Diagnostic("bound/free clash", f"{name} is both bound and a declared symbol"))
    return diags


def iter_terms(f: Formula) -> Iterator:
    for g in subformulas(f):
        if isinstance(g, Pred):
            yield from g.args


def symbols_in(f: Formula) -> set:
    names = set()
    for g in subformulas(f):
        if isinstance(g, Pred):
            names.add(g.name)
            names.update(t.name for t in g.args if isinstance(t, (Const, Var)))
    return names


def alpha_normalize(f: Formula, reserved=frozenset()) -> Formula:
    """Rename binders so each bound name is unique and distinct from ``reserved``.

    Names that are already unique are kept, so the operation is idempotent.
    """
    reserved = set(reserved)
    binders = {g.var for g in subformulas(f) if isinstance(g, BINDER_TYPES)}
    assigned: set = set()

    def fresh(name):
        if name not in reserved and name not in assigned:
            assigned.add(name)
            return name
        k = 1
        while f"{name}_{k}" in reserved | assigned | binders:
            k += 1
        assigned.add(f"{name}_{k}")
        return f"{name}_{k}"

    def rename_terms(g, old, new):
        if isinstance(g, Pred):
            return Pred(g.name, tuple(Bound(new) if isinstance(t, Bound) and t.name == old else t
                                      for t in g.args))
        if isinstance(g, BINDER_TYPES) and g.var == old:
            return g
        kids = children(g)
        return rebuild(g, tuple(rename_terms(k, old, new) for k in kids)) if kids else g

    def walk(g):
        if isinstance(g, BINDER_TYPES):
            new = fresh(g.var)
            body = rename_terms(g.body, g.var, new) if new != g.var else g.body
            return type(g)(new, walk(body))
        kids = children(g)
        return rebuild(g, tuple(walk(k) for k in kids)) if kids else g

    return walk(f)
