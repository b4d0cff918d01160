"""Finite Kripke structures for knowledge and probability, and local satisfaction."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Mapping, Optional

from .logic import (
    EQ, And, Bound, Const, Diagnostic, Forall, Formula, Knows, Lit, Not, Pred,
    ProbLeq, Signature, Top, Var, expand_derived, is_core, substitute,
)


class ModelError(ValueError):
    """A model or formula does not meet the preconditions of an evaluation."""


@dataclass(frozen=True)
class Interpretation:
    consts: Mapping[str, int] = field(default_factory=dict)
    vars: Mapping[str, int] = field(default_factory=dict)
    preds: Mapping[str, frozenset] = field(default_factory=dict)

    def value(self, name: str):
        if name in self.consts:
            return self.consts[name]
        if name in self.vars:
            return self.vars[name]
        return self.preds.get(name, frozenset())


@dataclass(frozen=True)
class ProbabilitySpace:
    """Sample set with a weight per sampled world; events are all subsets."""

    sample: frozenset
    weights: Mapping[str, Fraction]

    @classmethod
    def from_weights(cls, weights: Mapping[str, Fraction]) -> "ProbabilitySpace":
        return cls(frozenset(weights), dict(weights))

    def measure(self, event) -> Fraction:
        return sum((self.weights[w] for w in event if w in self.weights), Fraction(0))


@dataclass(frozen=True)
class KripkeModel:
    worlds: tuple
    agents: frozenset
    domain_size: int
    access: Mapping[str, frozenset]
    prob: Mapping[str, ProbabilitySpace]
    interp: Mapping[str, Interpretation]
    signature: Signature
    derived_access: bool = False

    def accessible(self, agent: str, w: str) -> list:
        rel = self.access.get(agent, frozenset())
        return [v for v in self.worlds if (w, v) in rel]


def derive_accessibility(interps: Mapping[str, Interpretation], sig: Signature) -> dict:
    """Worlds are ``a``-related iff they agree on every symbol owned by ``a`` (or shared)."""
    worlds = list(interps)
    rel = {}
    for a in sorted(sig.agents):
        owned = sorted(sig.owned_by(a))
        keys = {w: tuple(_symbol_value(interps[w], s) for s in owned) for w in worlds}
        rel[a] = frozenset((w, v) for w in worlds for v in worlds if keys[w] == keys[v])
    return rel


def _symbol_value(interp: Interpretation, name: str):
    if name == EQ:
        return None
    return interp.value(name)


def _partition_check(worlds, rel) -> list:
    problems = []
    if any((w, w) not in rel for w in worlds):
        problems.append("not reflexive")
    if any((v, w) not in rel for (w, v) in rel):
        problems.append("not symmetric")
    if any((u, x) not in rel for (u, v) in rel for (v2, x) in rel if v == v2):
        problems.append("not transitive")
    return problems


def validate_model(m: KripkeModel, mode: str = "s5_required") -> list:
    """Diagnostics for broken invariants; consistency problems are warnings."""
    if mode not in ("s5_required", "free"):
        raise ValueError(f"unknown validation mode {mode!r}")
    diags: list = []
    sig = m.signature
    worlds = set(m.worlds)

    def err(code, msg):
        diags.append(Diagnostic(code, msg))

    if not m.worlds:
        err("no worlds", "a model needs at least one world")
    if len(worlds) != len(m.worlds):
        err("duplicate world", "world ids must be unique")
    if m.domain_size < 1:
        err("empty domain", "domain size must be positive")
    for a in sorted(set(m.access) - set(sig.agents)):
        err("unknown agent", f"accessibility given for undeclared agent {a}")
    for a in sorted(sig.agents):
        if a not in m.access:
            err("missing accessibility", f"no relation for agent {a}")
            continue
        rel = m.access[a]
        bad = sorted({x for pair in rel for x in pair} - worlds)
        if bad:
            err("unknown world", f"relation of {a} mentions {', '.join(bad)}")
            continue
        if mode == "s5_required":
            for problem in _partition_check(m.worlds, rel):
                err(problem, f"accessibility of agent {a} is {problem}")

    n = m.domain_size
    for w in m.worlds:
        it = m.interp.get(w)
        if it is None:
            err("missing interpretation", f"world {w} has no interpretation")
            continue
        for c in sorted(sig.constants):
            if c not in it.consts:
                err("partial interpretation", f"constant {c} undefined in {w}")
            elif not 0 <= it.consts[c] < n:
                err("out of domain", f"{c} = @{it.consts[c]} in {w}")
        for v in sorted(sig.state_variables):
            if v not in it.vars:
                err("partial interpretation", f"variable {v} undefined in {w}")
            elif not 0 <= it.vars[v] < n:
                err("out of domain", f"{v} = @{it.vars[v]} in {w}")
        for p, k in sorted(sig.predicates.items()):
            if p == EQ:
                if p in it.preds and it.preds[p] != frozenset((d, d) for d in range(n)):
                    err("eq not identity", f"eq must be the identity in {w}")
                continue
            if p not in it.preds:
                err("partial interpretation", f"predicate {p} undefined in {w}")
                continue
            for tup in it.preds[p]:
                if len(tup) != k:
                    err("tuple width", f"{p} has arity {k} but contains {tup} in {w}")
                elif any(not 0 <= d < n for d in tup):
                    err("out of domain", f"{p} contains {tup} in {w}")
        extra = (set(it.consts) | set(it.vars) | set(it.preds)) - sig.symbols()
        for s in sorted(extra):
            err("unknown symbol", f"{s} interpreted in {w} but not declared")

    present = [w for w in m.worlds if w in m.interp]
    for s in sorted(sig.symbols()):
        if s == EQ or sig.is_world_dependent(s):
            continue
        values = {repr(_symbol_value(m.interp[w], s)) for w in present}
        if len(values) > 1:
            err("rigidity violated", f"rigid symbol {s} differs between worlds")

    for w in m.worlds:
        ps = m.prob.get(w)
        if ps is None:
            err("missing probability space", f"world {w} has none")
            continue
        if not ps.sample:
            err("empty sample", f"sample of {w} is empty")
        if not ps.sample <= worlds:
            err("unknown world", f"sample of {w} mentions {sorted(ps.sample - worlds)}")
        if set(ps.weights) != set(ps.sample):
            err("weights mismatch", f"weights of {w} are not defined exactly on its sample")
        if any(x <= 0 for x in ps.weights.values()):
            err("non-positive weight", f"a weight in {w} is not positive")
        total = sum(ps.weights.values(), Fraction(0))
        if total != 1:
            err("measure not normalized", f"weights of {w} sum to {total}")

    if not any(d.severity == "error" for d in diags):
        for a in sorted(sig.agents):
            for w in m.worlds:
                cell = set(m.accessible(a, w))
                if not m.prob[w].sample <= cell:
                    diags.append(Diagnostic(
                        "inconsistent sample",
                        f"sample of {w} leaves the information cell of {a}", "warning"))
    return diags


def errors(diags) -> list:
    return [d for d in diags if d.severity == "error"]


class Evaluator:
    """Memoised satisfaction checker for one model."""

    def __init__(self, m: KripkeModel):
        self.m = m
        self.cache: dict = {}

    def term(self, w: str, t) -> int:
        it = self.m.interp[w]
        if isinstance(t, Lit):
            return t.index
        if isinstance(t, Const):
            return it.consts[t.name]
        if isinstance(t, Var):
            return it.vars[t.name]
        raise ModelError(f"unsubstituted bound variable {t.name}")

    def sat(self, w: str, f: Formula) -> bool:
        key = (w, f)
        hit = self.cache.get(key)
        if hit is None:
            hit = self._sat(w, f)
            self.cache[key] = hit
        return hit

    def _sat(self, w, f) -> bool:
        m = self.m
        if isinstance(f, Top):
            return True
        if isinstance(f, Pred):
            vals = tuple(self.term(w, t) for t in f.args)
            if f.name == EQ:
                return vals[0] == vals[1]
            return vals in m.interp[w].preds.get(f.name, frozenset())
        if isinstance(f, Not):
            return not self.sat(w, f.body)
        if isinstance(f, And):
            return self.sat(w, f.left) and self.sat(w, f.right)
        if isinstance(f, Forall):
            return all(self.sat(w, substitute(f.body, f.var, Lit(d))) for d in range(m.domain_size))
        if isinstance(f, Knows):
            return all(self.sat(v, f.body) for v in m.accessible(f.agent, w))
        if isinstance(f, ProbLeq):
            total = Fraction(0)
            for t in f.terms:
                total += t.coef * self.measure(w, t.body)
            return total <= f.bound
        raise ModelError(f"not a core formula: {type(f).__name__}")

    def extension(self, w: str, f: Formula) -> frozenset:
        return frozenset(v for v in self.m.prob[w].sample if self.sat(v, f))

    def measure(self, w: str, f: Formula) -> Fraction:
        return self.m.prob[w].measure(self.extension(w, f))


def _core(f: Formula) -> Formula:
    return f if is_core(f) else expand_derived(f)


def _check_world(m: KripkeModel, w: str):
    if w not in m.interp:
        raise ModelError(f"unknown world {w}")


def satisfies(m: KripkeModel, w: str, f: Formula, evaluator: Optional[Evaluator] = None) -> bool:
    _check_world(m, w)
    return (evaluator or Evaluator(m)).sat(w, _core(f))


def valid_in_model(m: KripkeModel, f: Formula, evaluator: Optional[Evaluator] = None) -> bool:
    ev = evaluator or Evaluator(m)
    g = _core(f)
    return all(ev.sat(w, g) for w in m.worlds)


def extension(m: KripkeModel, w: str, f: Formula, evaluator: Optional[Evaluator] = None) -> frozenset:
    _check_world(m, w)
    return (evaluator or Evaluator(m)).extension(w, _core(f))


def measure(m: KripkeModel, w: str, f: Formula, evaluator: Optional[Evaluator] = None) -> Fraction:
    _check_world(m, w)
    return (evaluator or Evaluator(m)).measure(w, _core(f))


def all_tuples(domain_size: int, arity: int):
    return product(range(domain_size), repeat=arity)
