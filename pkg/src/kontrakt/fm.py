"""Exact Fourier-Motzkin elimination over the rationals with strict and non-strict rows."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

LE = "<="
LT = "<"


@dataclass(frozen=True)
class Constraint:
    """``sum(coeffs[j] * x_j) REL bound``."""

    coeffs: tuple
    rel: str
    bound: Fraction

    def holds(self, point: Sequence[Fraction]) -> bool:
        lhs = sum((c * x for c, x in zip(self.coeffs, point)), Fraction(0))
        return lhs < self.bound if self.rel == LT else lhs <= self.bound


@dataclass(frozen=True)
class LinearSystem:
    variables: tuple
    constraints: tuple

    def __post_init__(self):
        for c in self.constraints:
            if len(c.coeffs) != len(self.variables):
                raise ValueError("constraint row does not match the variable count")
            if c.rel not in (LE, LT):
                raise ValueError(f"unknown relation {c.rel!r}")

    @classmethod
    def simplex(cls, variables: Sequence, rows: Sequence[Constraint] = ()) -> "LinearSystem":
        """System over positive weights summing to one, plus extra rows."""
        n = len(variables)
        base = []
        for j in range(n):
            e = [Fraction(0)] * n
            e[j] = Fraction(-1)
            base.append(Constraint(tuple(e), LT, Fraction(0)))
        ones = tuple(Fraction(1) for _ in range(n))
        base.append(Constraint(ones, LE, Fraction(1)))
        base.append(Constraint(tuple(-x for x in ones), LE, Fraction(-1)))
        return cls(tuple(variables), tuple(base) + tuple(rows))

    def satisfied_by(self, point: Sequence[Fraction]) -> bool:
        return all(c.holds(point) for c in self.constraints)


# rows internally: (coeff tuple, strict flag, bound)


def _normalize(row):
    coeffs, strict, bound = row
    pivot = next((abs(c) for c in coeffs if c != 0), None)
    if pivot is None or pivot == 1:
        return row
    return (tuple(c / pivot for c in coeffs), strict, bound / pivot)


def _eliminate(rows, j):
    pos, neg, rest = [], [], []
    for r in rows:
        c = r[0][j]
        (pos if c > 0 else neg if c < 0 else rest).append(r)
    out = set(rest)
    for p in pos:
        for q in neg:
            a, b = p[0][j], -q[0][j]
            coeffs = tuple(b * x + a * y for x, y in zip(p[0], q[0]))
            out.add(_normalize((coeffs, p[1] or q[1], b * p[2] + a * q[2])))
    return out


def _trivially_false(row) -> bool:
    coeffs, strict, bound = row
    if any(c != 0 for c in coeffs):
        return False
    return bound <= 0 if strict else bound < 0


def _pick(lo, lo_strict, hi, hi_strict) -> Optional[Fraction]:
    if lo is not None and hi is not None:
        if lo > hi or (lo == hi and (lo_strict or hi_strict)):
            return None
        if lo == hi:
            return lo
        return (lo + hi) / 2
    if lo is not None:
        return lo + 1 if lo_strict else lo
    if hi is not None:
        return hi - 1 if hi_strict else hi
    return Fraction(0)


def feasible(sys: LinearSystem) -> Optional[dict]:
    """A rational point satisfying every row, or ``None`` if there is none."""
    n = len(sys.variables)
    rows = {_normalize((tuple(Fraction(c) for c in con.coeffs), con.rel == LT, Fraction(con.bound)))
            for con in sys.constraints}
    stages = []
    for j in range(n):
        if any(_trivially_false(r) for r in rows):
            return None
        stages.append(rows)
        rows = _eliminate(rows, j)
    if any(_trivially_false(r) for r in rows):
        return None

    point = [Fraction(0)] * n
    for j in reversed(range(n)):
        lo = hi = None
        lo_strict = hi_strict = False
        for coeffs, strict, bound in stages[j]:
            c = coeffs[j]
            if c == 0:
                continue
            rest = bound - sum((coeffs[k] * point[k] for k in range(j + 1, n)), Fraction(0))
            limit = rest / c
            if c > 0:
                if hi is None or limit < hi or (limit == hi and strict):
                    hi, hi_strict = limit, strict
            else:
                if lo is None or limit > lo or (limit == lo and strict):
                    lo, lo_strict = limit, strict
        value = _pick(lo, lo_strict, hi, hi_strict)
        if value is None:  # pragma: no cover - excluded by elimination
            raise AssertionError("back-substitution found an empty interval")
        point[j] = value
    assert sys.satisfied_by(point)
    return dict(zip(sys.variables, point))


def infeasible_core(sys: LinearSystem, keep: int) -> list:
    """Indices of a minimal infeasible subset of rows ``keep..`` (rows before ``keep`` always kept)."""
    base = list(sys.constraints[:keep])
    chosen = list(range(keep, len(sys.constraints)))
    i = 0
    while i < len(chosen):
        trial = chosen[:i] + chosen[i + 1:]
        sub = LinearSystem(sys.variables, tuple(base + [sys.constraints[k] for k in trial]))
        if feasible(sub) is None:
            chosen = trial
        else:
            i += 1
    return chosen
