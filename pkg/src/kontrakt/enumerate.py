"""Explicit skeleton enumeration with guess-and-check probability atoms.

This is the reference search path: it materialises every structure within the
bounds and is only practical for small signatures, which is what the oracle
tests need. Probability weights stay symbolic; each skeleton is checked by
guessing truth values of the probability atoms it needs and solving the
induced per-world linear systems.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, combinations_with_replacement, product
from typing import Iterator, Optional

from .fm import LE, LT, Constraint, LinearSystem, feasible
from .kripke import Evaluator, Interpretation, KripkeModel, ProbabilitySpace, derive_accessibility
from .logic import EQ, ProbLeq


@dataclass(frozen=True)
class Skeleton:
    """A structure without probability weights."""

    worlds: tuple
    domain_size: int
    interps: tuple
    access: dict
    samples: tuple  # sample set (world names) per world

    def model(self, sig, weights: dict, derived: bool) -> KripkeModel:
        prob = {w: ProbabilitySpace.from_weights(weights[w]) for w in self.worlds}
        return KripkeModel(self.worlds, frozenset(sig.agents), self.domain_size, self.access, prob,
                           dict(zip(self.worlds, self.interps)), sig, derived_access=derived)


def set_partitions(items: list) -> Iterator[list]:
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def _subsets(arity: int, size: int):
    tuples = list(product(range(size), repeat=arity))
    for r in range(len(tuples) + 1):
        for chosen in combinations(tuples, r):
            yield frozenset(chosen)


def enumerate_structures(sig, domain, bounds) -> Iterator[Skeleton]:
    """All skeletons within ``bounds``, worlds ordered by interpretation fingerprint."""
    size = domain.size
    free_dep = sorted(s for s in sig.symbols()
                      if s != EQ and sig.is_world_dependent(s) and s not in domain.pinned)
    free_rigid = sorted(p for p in sig.predicates
                        if p != EQ and not sig.is_world_dependent(p) and p not in domain.pinned)

    def choices(names):
        per = []
        for s in names:
            if s in sig.state_variables:
                per.append(list(range(size)))
            else:
                per.append(list(_subsets(sig.predicates[s], size)))
        return [dict(zip(names, c)) for c in product(*per)]

    local = choices(free_dep)
    for n in range(1, bounds.max_worlds + 1):
        names = tuple(f"w{i + 1}" for i in range(n))
        for rigid in choices(free_rigid):
            for combo in combinations_with_replacement(range(len(local)), n):
                interps = []
                for idx in combo:
                    vals = local[idx]
                    preds = {p: frozenset(domain.pinned[p]) for p in domain.pinned}
                    preds.update(rigid)
                    preds.update({p: v for p, v in vals.items() if p in sig.predicates})
                    vars_ = {x: v for x, v in vals.items() if x in sig.state_variables}
                    interps.append(Interpretation(dict(domain.consts), vars_, preds))
                interps = tuple(interps)
                for access in _accessibilities(sig, names, interps, bounds.access):
                    for samples in _samples(names, access, bounds.sample):
                        yield Skeleton(names, size, interps, access, samples)


def _accessibilities(sig, names, interps, mode):
    if mode == "derived":
        yield derive_accessibility(dict(zip(names, interps)), sig)
        return
    agents = sorted(sig.agents)
    parts = list(set_partitions(list(names)))
    for combo in product(parts, repeat=len(agents)):
        access = {}
        for a, part in zip(agents, combo):
            access[a] = frozenset((u, v) for block in part for u in block for v in block)
        yield access


def _samples(names, access, mode):
    if mode == "full":
        yield tuple(frozenset(names) for _ in names)
    elif mode.startswith("cell:"):
        rel = access[mode[5:]]
        yield tuple(frozenset(v for v in names if (w, v) in rel) for w in names)
    else:
        nonempty = [frozenset(c) for r in range(1, len(names) + 1) for c in combinations(names, r)]
        yield from product(nonempty, repeat=len(names))


class _NeedGuess(Exception):
    def __init__(self, key):
        self.key = key


class _GuessEvaluator(Evaluator):
    """Evaluates with probability atoms read from a guess table."""

    def __init__(self, m, guesses):
        super().__init__(m)
        self.guesses = guesses

    def _sat(self, w, f):
        if isinstance(f, ProbLeq):
            key = (f, w)
            if key not in self.guesses:
                raise _NeedGuess(key)
            return self.guesses[key]
        return super()._sat(w, f)


def guess_and_check(sig, skel: Skeleton, premises, conclusion, derived: bool, stats=None):
    """Weights making ``skel`` a countermodel, or ``None``."""
    shell = skel.model(sig, {w: {v: Fraction(1, len(s)) for v in s}
                             for w, s in zip(skel.worlds, skel.samples)}, derived)
    samples = dict(zip(skel.worlds, skel.samples))

    def attempt(guesses):
        ev = _GuessEvaluator(shell, guesses)
        try:
            if not all(ev.sat(w, p) for p in premises for w in skel.worlds):
                return None
            if all(ev.sat(w, conclusion) for w in skel.worlds):
                return None
            rows: dict = {w: [] for w in skel.worlds}
            for (f, w), value in list(guesses.items()):
                support = sorted(samples[w])
                coeffs = [Fraction(0)] * len(support)
                for t in f.terms:
                    for j, v in enumerate(support):
                        if ev.sat(v, t.body):
                            coeffs[j] += t.coef
                if value:
                    rows[w].append(Constraint(tuple(coeffs), LE, f.bound))
                else:
                    rows[w].append(Constraint(tuple(-c for c in coeffs), LT, -f.bound))
        except _NeedGuess as need:
            for value in (True, False):
                found = attempt({**guesses, need.key: value})
                if found is not None:
                    return found
            return None
        weights = {}
        for w in skel.worlds:
            if stats is not None:
                stats.feasibility_calls += 1
            point = feasible(LinearSystem.simplex(tuple(sorted(samples[w])), rows[w]))
            if point is None:
                return None
            weights[w] = point
        return weights

    weights = attempt({})
    if weights is None:
        return None
    return skel.model(sig, weights, derived)


def grid_weights(sample, max_den: int) -> Iterator[dict]:
    """Positive weight vectors on ``sample`` with denominators up to ``max_den``."""
    support = sorted(sample)
    grid = sorted({Fraction(p, q) for q in range(1, max_den + 1) for p in range(1, q + 1)})
    for head in product(grid, repeat=len(support) - 1):
        last = 1 - sum(head, Fraction(0))
        if last > 0 and last.denominator <= max_den:
            yield dict(zip(support, head + (last,)))


def grid_countermodel(sig, skel: Skeleton, premises, conclusion, derived: bool,
                      max_den: int = 8) -> Optional[KripkeModel]:
    """Brute force over gridded weights; an oracle for :func:`guess_and_check`."""
    per_world = [list(grid_weights(s, max_den)) for s in skel.samples]
    for combo in product(*per_world):
        m = skel.model(sig, dict(zip(skel.worlds, combo)), derived)
        ev = Evaluator(m)
        if all(ev.sat(w, p) for p in premises for w in m.worlds) and \
                not all(ev.sat(w, conclusion) for w in m.worlds):
            return m
    return None
