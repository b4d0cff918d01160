"""Grounded SAT engine for bounded countermodel search.

For a fixed number of worlds the obligation is grounded over the finite domain
into CNF. Every probability atom instance at a world becomes a guessed boolean;
boolean models are checked lazily against exact linear feasibility of the
per-world weights, and infeasible guesses are blocked by a clause built from a
minimal infeasible core.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Optional

from pysat.solvers import Solver

from .fm import LE, LT, Constraint, LinearSystem, feasible, infeasible_core
from .kripke import Interpretation, KripkeModel, ProbabilitySpace, derive_accessibility
from .logic import (
    EQ, And, Const, Forall, Knows, Lit, Not, Pred, ProbLeq, Signature, Top, Var,
    substitute,
)

TRUE, FALSE = 1, -1
SAT_BACKEND = "minisat22"


class SearchTimeout(Exception):
    pass


@dataclass
class Stats:
    structures: int = 0
    feasibility_calls: int = 0
    lemmas: int = 0


@dataclass(frozen=True)
class Domain:
    """Fixed part of every candidate structure: domain, constants, pinned predicates."""

    size: int
    consts: dict
    pinned: dict  # predicate -> frozenset of tuples, identical in every world


class _Cnf:
    def __init__(self, solver):
        self.solver = solver
        self.nv = 1
        solver.add_clause([TRUE])
        self.gates: dict = {}

    def new(self) -> int:
        self.nv += 1
        return self.nv

    def add(self, clause):
        self.solver.add_clause(list(clause))

    def and_(self, lits) -> int:
        seen = set()
        for lit in lits:
            if lit == FALSE:
                return FALSE
            if lit == TRUE:
                continue
            if -lit in seen:
                return FALSE
            seen.add(lit)
        if not seen:
            return TRUE
        if len(seen) == 1:
            return next(iter(seen))
        key = frozenset(seen)
        v = self.gates.get(key)
        if v is None:
            v = self.new()
            ordered = sorted(seen, key=lambda x: (abs(x), x))
            for lit in ordered:
                self.add([-v, lit])
            self.add([v] + [-lit for lit in ordered])
            self.gates[key] = v
        return v

    def or_(self, lits) -> int:
        return -self.and_([-lit for lit in lits])

    def iff(self, a: int, b: int) -> int:
        return self.and_([self.or_([-a, b]), self.or_([a, -b])])


@dataclass
class _AtomInstance:
    pi: int
    world: int
    terms: list  # (coef, [membership literal per world])
    bound: Fraction


class GroundSearch:
    """Countermodel search with exactly ``n`` worlds."""

    def __init__(self, sig: Signature, domain: Domain, n: int, access: str, sample: str,
                 premises, conclusion, deadline: Optional[float] = None, stats: Optional[Stats] = None):
        self.sig, self.dom, self.n = sig, domain, n
        self.access_mode, self.sample_mode = access, sample
        self.deadline = deadline
        self.stats = stats or Stats()
        self.solver = Solver(name=SAT_BACKEND)
        self.cnf = _Cnf(self.solver)
        self.pred_vars: dict = {}
        self.var_bits: dict = {}
        self.acc_lits: dict = {}
        self.sample_lits: dict = {}
        self.memo: dict = {}
        self.atoms: list = []
        self.lemma_keys: set = set()
        for p in premises:
            for w in range(n):
                self.cnf.add([self.encode(p, w)])
        self.cnf.add([-self.encode(conclusion, 0)])
        # every sample set is fixed now, so its literals exist before solving
        for w in range(n):
            for v in range(n):
                self.sample(w, v)

    def close(self):
        self.solver.delete()

    # -- symbols ------------------------------------------------------------

    def pred_lit(self, name: str, w: int, tup: tuple) -> int:
        if name == EQ:
            return TRUE if tup[0] == tup[1] else FALSE
        if name in self.dom.pinned:
            return TRUE if tup in self.dom.pinned[name] else FALSE
        key = (name, None if name in self.sig.rigid else w, tup)
        v = self.pred_vars.get(key)
        if v is None:
            v = self.pred_vars[key] = self.cnf.new()
        return v

    def var_lits(self, name: str, w: int) -> list:
        bits = self.var_bits.get((name, w))
        if bits is None:
            bits = [self.cnf.new() for _ in range(self.dom.size)]
            self.cnf.add(bits)
            for i in range(len(bits)):
                for j in range(i + 1, len(bits)):
                    self.cnf.add([-bits[i], -bits[j]])
            self.var_bits[(name, w)] = bits
        return bits

    def sym_equal(self, name: str, w: int, v: int) -> int:
        if name in self.sig.state_variables:
            a, b = self.var_lits(name, w), self.var_lits(name, v)
            return self.cnf.or_([self.cnf.and_([x, y]) for x, y in zip(a, b)])
        if name in self.dom.pinned or name in self.sig.rigid:
            return TRUE
        k = self.sig.predicates[name]
        return self.cnf.and_([self.cnf.iff(self.pred_lit(name, w, t), self.pred_lit(name, v, t))
                              for t in product(range(self.dom.size), repeat=k)])

    def acc(self, agent: str, w: int, v: int) -> int:
        if w == v:
            return TRUE
        key = (agent, min(w, v), max(w, v))
        lit = self.acc_lits.get(key)
        if lit is not None:
            return lit
        if self.access_mode == "derived":
            owned = sorted(s for s in self.sig.owned_by(agent)
                           if s != EQ and self.sig.is_world_dependent(s))
            lit = self.cnf.and_([self.sym_equal(s, w, v) for s in owned])
            self.acc_lits[key] = lit
        else:
            for i in range(self.n):
                for j in range(i + 1, self.n):
                    self.acc_lits[(agent, i, j)] = self.cnf.new()
            for i, j, k in product(range(self.n), repeat=3):
                if len({i, j, k}) == 3:
                    self.cnf.add([-self.acc(agent, i, j), -self.acc(agent, j, k), self.acc(agent, i, k)])
            lit = self.acc_lits[key]
        return lit

    def sample(self, w: int, v: int) -> int:
        key = (w, v)
        lit = self.sample_lits.get(key)
        if lit is not None:
            return lit
        mode = self.sample_mode
        if mode == "full":
            lit = TRUE
        elif mode.startswith("cell:"):
            lit = self.acc(mode[5:], w, v)
        else:
            row = [self.cnf.new() for _ in range(self.n)]
            for u, x in enumerate(row):
                self.sample_lits[(w, u)] = x
            self.cnf.add(row)
            return self.sample_lits[key]
        self.sample_lits[key] = lit
        return lit

    # -- formulas -----------------------------------------------------------

    def term(self, t, w):
        if isinstance(t, Lit):
            return t.index
        if isinstance(t, Const):
            return self.dom.consts[t.name]
        if isinstance(t, Var):
            return ("var", t.name, w)
        raise ValueError(f"unsubstituted bound variable {t.name}")

    def encode(self, f, w: int) -> int:
        key = (f, w)
        lit = self.memo.get(key)
        if lit is None:
            lit = self._encode(f, w)
            self.memo[key] = lit
        return lit

    def _encode(self, f, w: int) -> int:
        cnf = self.cnf
        if isinstance(f, Top):
            return TRUE
        if isinstance(f, Not):
            return -self.encode(f.body, w)
        if isinstance(f, And):
            return cnf.and_([self.encode(f.left, w), self.encode(f.right, w)])
        if isinstance(f, Forall):
            return cnf.and_([self.encode(substitute(f.body, f.var, Lit(d)), w)
                             for d in range(self.dom.size)])
        if isinstance(f, Knows):
            return cnf.and_([cnf.or_([-self.acc(f.agent, w, v), self.encode(f.body, v)])
                             for v in range(self.n)])
        if isinstance(f, Pred):
            return self._encode_pred(f, w)
        if isinstance(f, ProbLeq):
            pi = cnf.new()
            terms = []
            for t in f.terms:
                members = [cnf.and_([self.sample(w, v), self.encode(t.body, v)]) for v in range(self.n)]
                terms.append((t.coef, members))
            self.atoms.append(_AtomInstance(pi, w, terms, f.bound))
            return pi
        raise ValueError(f"not a core formula: {type(f).__name__}")

    def _encode_pred(self, f: Pred, w: int) -> int:
        vals = [self.term(t, w) for t in f.args]
        refs = sorted({v for v in vals if isinstance(v, tuple)})
        if not refs:
            return self.pred_lit(f.name, w, tuple(vals))
        options = []
        for choice in product(range(self.dom.size), repeat=len(refs)):
            env = dict(zip(refs, choice))
            tup = tuple(env[v] if isinstance(v, tuple) else v for v in vals)
            plit = self.pred_lit(f.name, w, tup)
            if plit == FALSE:
                continue
            bits = [self.var_lits(r[1], r[2])[d] for r, d in zip(refs, choice)]
            options.append(self.cnf.and_(bits + [plit]))
        return self.cnf.or_(options)

    # -- lazy theory loop ---------------------------------------------------

    def _check_time(self):
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise SearchTimeout()

    def _theory(self, model: set):
        """Per-world weights realising the guessed atoms, or blocking clauses."""
        def val(lit):
            return lit in model if lit > 0 else -lit not in model
        weights, lemmas = {}, []
        for w in range(self.n):
            support = [v for v in range(self.n) if val(self.sample(w, v))]
            insts = [a for a in self.atoms if a.world == w]
            rows = []
            for a in insts:
                coeffs = [Fraction(0)] * len(support)
                for coef, members in a.terms:
                    for j, v in enumerate(support):
                        if val(members[v]):
                            coeffs[j] += coef
                if val(a.pi):
                    rows.append(Constraint(tuple(coeffs), LE, a.bound))
                else:
                    rows.append(Constraint(tuple(-c for c in coeffs), LT, -a.bound))
            system = LinearSystem.simplex(tuple(support), rows)
            self.stats.feasibility_calls += 1
            point = feasible(system)
            if point is not None:
                weights[w] = point
                continue
            keep = len(support) + 2
            core = infeasible_core(system, keep)
            clause = set()
            for v in range(self.n):
                lit = self.sample(w, v)
                if lit not in (TRUE, FALSE):
                    clause.add(-lit if val(lit) else lit)
            for k in core:
                a = insts[k - keep]
                lits = [a.pi] + [m for _, members in a.terms for m in members]
                for lit in lits:
                    if lit not in (TRUE, FALSE):
                        clause.add(-lit if val(lit) else lit)
            lemmas.append(sorted(clause, key=lambda x: (abs(x), x)))
        return weights, lemmas

    def solve(self, assumptions=()):
        while True:
            self._check_time()
            self.stats.structures += 1
            if not self.solver.solve(assumptions=list(assumptions)):
                return None
            model = {lit for lit in self.solver.get_model() if lit > 0}
            weights, lemmas = self._theory(model)
            if not lemmas:
                return model, weights
            for c in lemmas:
                self.stats.lemmas += 1
                self.cnf.add(c)

    def fingerprint(self) -> list:
        """(literal, preferred value) in canonical witness order."""
        order = []
        for key in sorted(k for k in self.pred_vars if k[1] is None):
            order.append((self.pred_vars[key], False))
        for w in range(self.n):
            names = sorted(set(k[0] for k in self.pred_vars if k[1] == w)
                           | set(k[0] for k in self.var_bits if k[1] == w))
            for name in names:
                if (name, w) in self.var_bits:
                    for bit in self.var_bits[(name, w)]:
                        order.append((bit, True))
                else:
                    for key in sorted(k for k in self.pred_vars if k[0] == name and k[1] == w):
                        order.append((self.pred_vars[key], False))
        if self.access_mode == "free_s5":
            for key in sorted(self.acc_lits):
                order.append((self.acc_lits[key], False))
        if self.sample_mode == "free":
            for key in sorted(self.sample_lits):
                order.append((self.sample_lits[key], False))
        return [(lit, pref) for lit, pref in order if lit not in (TRUE, FALSE)]

    def minimal_countermodel(self):
        found = self.solve()
        if found is None:
            return None
        model, weights = found
        fixed = []
        for lit, pref in self.fingerprint():
            want = lit if pref else -lit
            if (lit in model) == pref:  # decision literals are all positive
                fixed.append(want)
                continue
            trial = self.solve(fixed + [want])
            if trial is not None:
                model, weights = trial
                fixed.append(want)
            else:
                fixed.append(-want)
        return model, weights

    # -- witness ------------------------------------------------------------

    def build_model(self, model: set, weights: dict) -> KripkeModel:
        sig, dom, n = self.sig, self.dom, self.n
        names = [f"w{i + 1}" for i in range(n)]
        interps = {}
        for w in range(n):
            vars_ = {}
            for x in sorted(sig.state_variables):
                bits = self.var_bits.get((x, w))
                vars_[x] = next((d for d, b in enumerate(bits) if b in model), 0) if bits else 0
            preds = {}
            for p in sorted(sig.predicates):
                if p == EQ:
                    continue
                if p in dom.pinned:
                    preds[p] = frozenset(dom.pinned[p])
                    continue
                wkey = None if p in sig.rigid else w
                preds[p] = frozenset(k[2] for k, v in self.pred_vars.items()
                                     if k[0] == p and k[1] == wkey and v in model)
            interps[names[w]] = Interpretation(dict(dom.consts), vars_, preds)
        if self.access_mode == "derived":
            access = derive_accessibility(interps, sig)
        else:
            access = {}
            for a in sorted(sig.agents):
                rel = set()
                for i in range(n):
                    for j in range(n):
                        key = (a, min(i, j), max(i, j))
                        if i == j or (key in self.acc_lits and self.acc_lits[key] in model):
                            rel.add((names[i], names[j]))
                access[a] = frozenset(rel)
        prob = {names[w]: ProbabilitySpace.from_weights({names[v]: x for v, x in weights[w].items()})
                for w in range(n)}
        return KripkeModel(tuple(names), frozenset(sig.agents), dom.size, access, prob, interps, sig,
                           derived_access=self.access_mode == "derived")
