"""Specifications, assume/guarantee contracts and their algebra."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .logic import And, Formula, Implies, Not, Or, Signature, SignatureClash, Top, well_formed
from .search import CheckResult, SearchBounds, Template, UsageError, Verdict, entails_global


class CompositionError(ValueError):
    """Two signatures disagree on a symbol."""


def _union(s1: Signature, s2: Signature) -> Signature:
    try:
        return s1.union(s2)
    except SignatureClash as exc:
        raise CompositionError(str(exc)) from exc


@dataclass(frozen=True)
class Specification:
    sig: Signature
    phi: Formula

    def __post_init__(self):
        diags = well_formed(self.phi, self.sig)
        if diags:
            raise UsageError("; ".join(str(d) for d in diags))


@dataclass(frozen=True)
class Contract:
    sig: Signature
    assume: Formula
    guarantee: Formula

    def __post_init__(self):
        diags = well_formed(self.assume, self.sig) + well_formed(self.guarantee, self.sig)
        if diags:
            raise UsageError("; ".join(str(d) for d in diags))

    @property
    def assumption(self) -> Specification:
        return Specification(self.sig, self.assume)

    @property
    def promise(self) -> Specification:
        return Specification(self.sig, self.guarantee)


# ---------------------------------------------------------------------------
# Specification theory
# ---------------------------------------------------------------------------


def compose_spec(s1: Specification, s2: Specification) -> Specification:
    return Specification(_union(s1.sig, s2.sig), And(s1.phi, s2.phi))


def conjoin_spec(s1: Specification, s2: Specification) -> Specification:
    """Most general common refinement; coincides with composition for logical specs."""
    return compose_spec(s1, s2)


def quotient_spec(t: Specification, s: Specification) -> Specification:
    """Most general X with ``s (x) X`` refining ``t``."""
    return Specification(_union(t.sig, s.sig), Implies(s.phi, t.phi))


def _not_applicable(label: str, message: str) -> CheckResult:
    return CheckResult(Verdict.NOT_APPLICABLE, diagnostics=[message], label=label)


def refines_spec(s1: Specification, s2: Specification, bounds: SearchBounds = SearchBounds(),
                 pinned: Optional[Template] = None, theory: Sequence[Formula] = (),
                 engine: str = "sat") -> CheckResult:
    """``s1 <= s2``: s2's signature inside s1's and phi1 entails phi2."""
    if not s1.sig.contains(s2.sig):
        missing = sorted(s2.sig.symbols() - s1.sig.symbols())
        return _not_applicable("refinement", f"signature not contained: {', '.join(missing) or 'ownership differs'}")
    res = entails_global(list(theory) + [s1.phi], s2.phi, s1.sig, pinned, bounds, engine)
    res.label = "refinement"
    return res


def relativized_refines(s: Specification, t: Specification, e: Specification,
                        bounds: SearchBounds = SearchBounds(), pinned: Optional[Template] = None,
                        theory: Sequence[Formula] = (), engine: str = "sat") -> CheckResult:
    """``s`` refines ``t`` in every environment refining ``e``; reduces to ``e & s |= t``."""
    sig = _union(_union(s.sig, t.sig), e.sig)
    res = entails_global(list(theory) + [e.phi, s.phi], t.phi, sig, pinned, bounds, engine)
    res.label = "relativized refinement"
    return res


# ---------------------------------------------------------------------------
# Contract theory
# ---------------------------------------------------------------------------


def _is_saturated(c: Contract) -> bool:
    return isinstance(c.guarantee, Implies) and c.guarantee.left == c.assume


def saturate(c: Contract) -> Contract:
    """Normal form: guarantee becomes ``A -> G``. Idempotent on syntax."""
    if _is_saturated(c):
        return c
    return Contract(c.sig, c.assume, Implies(c.assume, c.guarantee))


def _combine(label: str, parts: Sequence[CheckResult]) -> CheckResult:
    for verdict in (Verdict.NOT_APPLICABLE, Verdict.COUNTERMODEL, Verdict.UNKNOWN):
        for r in parts:
            if r.verdict is verdict:
                return CheckResult(verdict, r.witness, r.world, r.stats, sum(p.elapsed for p in parts),
                                   r.bounds, list(r.diagnostics) + [f"failing part: {r.label}"], label)
    first = parts[0]
    return CheckResult(Verdict.VALID, stats=first.stats, elapsed=sum(p.elapsed for p in parts),
                       bounds=first.bounds, label=label)


def refines_contract(c1: Contract, c2: Contract, bounds: SearchBounds = SearchBounds(),
                     pinned: Optional[Template] = None, theory: Sequence[Formula] = (),
                     engine: str = "sat") -> CheckResult:
    """``c1 <= c2``: c1 accepts every environment of c2 and promises at least c2's guarantee."""
    c1, c2 = saturate(c1), saturate(c2)
    a = refines_spec(Specification(c2.sig, c2.assume), Specification(c1.sig, c1.assume), bounds, pinned, theory, engine)
    a.label = "assumption"
    g = refines_spec(Specification(c1.sig, c1.guarantee), Specification(c2.sig, c2.guarantee), bounds, pinned,
                     theory, engine)
    g.label = "guarantee"
    return _combine("contract refinement", [a, g])


def compose_contracts(c1: Contract, c2: Contract) -> Contract:
    c1, c2 = saturate(c1), saturate(c2)
    g1, g2 = c1.guarantee, c2.guarantee
    sig = _union(c1.sig, c2.sig)
    return saturate(Contract(sig, And(Implies(g2, c1.assume), Implies(g1, c2.assume)), And(g1, g2)))


def quotient_contracts(c1: Contract, c2: Contract) -> Contract:
    """Most general C with ``C (x) c2 <= c1``."""
    c1, c2 = saturate(c1), saturate(c2)
    sig = _union(c1.sig, c2.sig)
    a = And(c1.assume, c2.guarantee)
    g = Or(And(c1.guarantee, c2.assume), Not(a))
    return saturate(Contract(sig, a, g))


def verify_implementation(i: Specification, c: Contract, bounds: SearchBounds = SearchBounds(),
                          pinned: Optional[Template] = None, theory: Sequence[Formula] = (),
                          engine: str = "sat") -> CheckResult:
    """``I & A |= G``."""
    sig = _union(i.sig, c.sig)
    res = entails_global(list(theory) + [i.phi, c.assume], c.guarantee, sig, pinned, bounds, engine)
    res.label = "implementation"
    return res


# ---------------------------------------------------------------------------
# Decomposition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Obligation:
    label: str
    premises: tuple
    conclusion: Formula


@dataclass
class DecompositionReport:
    obligations: list
    results: list = field(default_factory=list)

    @property
    def verdict(self) -> Verdict:
        return _combine("decomposition", self.results).verdict

    @property
    def ok(self) -> bool:
        return self.verdict is Verdict.VALID


def decomposition_obligations(top: Contract, parts: Sequence[Contract], theory: Sequence[Formula] = (),
                              strict: bool = False, names: Optional[Sequence[str]] = None) -> list:
    """G-obligation first, then one A-obligation per part."""
    top = saturate(top)
    parts = [saturate(p) for p in parts]
    names = list(names) if names is not None else [f"part {i + 1}" for i in range(len(parts))]
    context = list(theory) + ([] if strict else [top.assume])
    obligations = [Obligation("guarantee", tuple(context + [p.guarantee for p in parts]), top.guarantee)]
    for i, p in enumerate(parts):
        others = [q.guarantee for j, q in enumerate(parts) if j != i]
        obligations.append(Obligation(f"assumption of {names[i]}",
                                      tuple(list(theory) + [top.assume] + others), p.assume))
    return obligations


def _run(args):
    ob, sig, pinned, bounds, engine = args
    res = entails_global(list(ob.premises), ob.conclusion, sig, pinned, bounds, engine)
    res.label = ob.label
    return res


def default_jobs() -> int:
    env = os.environ.get("KONTRAKT_JOBS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def check_decomposition(top: Contract, parts: Sequence[Contract], theory: Sequence[Formula] = (),
                        bounds: SearchBounds = SearchBounds(), pinned: Optional[Template] = None,
                        strict: bool = False, names: Optional[Sequence[str]] = None,
                        engine: str = "sat", jobs: int = 1) -> DecompositionReport:
    """Check every obligation; results are in obligation order whatever ``jobs`` is."""
    sig = top.sig
    for p in parts:
        sig = _union(sig, p.sig)
    obligations = decomposition_obligations(top, parts, theory, strict, names)
    tasks = [(ob, sig, pinned, bounds, engine) for ob in obligations]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            results = list(pool.map(_run, tasks))
    else:
        results = [_run(t) for t in tasks]
    return DecompositionReport(obligations, results)
