"""Bounded global consequence checking with countermodel witnesses."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence

from .enumerate import enumerate_structures, guess_and_check
from .ground import Domain, GroundSearch, SearchTimeout, Stats
from .kripke import KripkeModel, errors, satisfies, valid_in_model, validate_model
from .logic import EQ, Formula, Signature, agents_in, expand_derived, well_formed

ACCESS_MODES = ("derived", "free_s5")


class UsageError(ValueError):
    """Ill-formed input to a check."""


class Verdict(str, Enum):
    VALID = "valid_within_bounds"
    COUNTERMODEL = "countermodel"
    UNKNOWN = "unknown"
    NOT_APPLICABLE = "not_applicable"


@dataclass(frozen=True)
class Template:
    """Pinned part of every candidate model: domain, constants and fixed predicates."""

    domain_size: Optional[int] = None
    consts: dict = field(default_factory=dict)
    preds: dict = field(default_factory=dict)
    access: Optional[str] = None
    sample: Optional[str] = None


@dataclass(frozen=True)
class SearchBounds:
    max_worlds: int = 3
    max_anon: int = 1
    access: Optional[str] = None  # "derived" or "free_s5"; None takes the template's or "derived"
    sample: Optional[str] = None  # "full", "cell:AGENT", "free"; None picks per obligation
    timeout: Optional[float] = None  # seconds

    def __post_init__(self):
        if self.max_worlds < 1:
            raise ValueError("max_worlds must be at least 1")
        if self.max_anon < 0:
            raise ValueError("max_anon must be non-negative")
        if self.access is not None and self.access not in ACCESS_MODES:
            raise ValueError(f"unknown accessibility mode {self.access!r}")
        if self.sample is not None and not (self.sample in ("full", "free") or self.sample.startswith("cell:")):
            raise ValueError(f"unknown sample mode {self.sample!r}")

    def describe(self) -> str:
        return (f"worlds<={self.max_worlds}, anon<={self.max_anon}, access={self.access or 'derived'}, "
                f"sample={self.sample or 'auto'}")


@dataclass
class CheckResult:
    verdict: Verdict
    witness: Optional[KripkeModel] = None
    world: Optional[str] = None
    stats: Stats = field(default_factory=Stats)
    elapsed: float = 0.0
    bounds: Optional[SearchBounds] = None
    diagnostics: list = field(default_factory=list)
    label: str = ""

    @property
    def ok(self) -> bool:
        return self.verdict is Verdict.VALID


def resolve_domain(sig: Signature, pinned: Optional[Template], bounds: SearchBounds) -> Domain:
    """Domain elements: pinned ones, else one per constant (unique names) plus anonymous ones."""
    pinned = pinned or Template()
    consts = dict(pinned.consts)
    free = sorted(c for c in sig.constants if c not in consts)
    if pinned.domain_size is not None:
        size = pinned.domain_size
        unused = [d for d in range(size) if d not in set(consts.values())]
        if len(unused) < len(free):
            raise UsageError("pinned domain too small for the unpinned constants")
        consts.update(zip(free, unused))
    else:
        size = len(set(consts.values())) + len(free) + bounds.max_anon
        nxt = max(consts.values(), default=-1) + 1
        for c in free:
            consts[c] = nxt
            nxt += 1
        size = max(size, nxt, 1)
    for p, rows in pinned.preds.items():
        if p not in sig.predicates:
            raise UsageError(f"template pins undeclared predicate {p}")
        if any(len(t) != sig.predicates[p] or not all(0 <= d < size for d in t) for t in rows):
            raise UsageError(f"template interpretation of {p} is malformed")
    preds = {p: frozenset(rows) for p, rows in pinned.preds.items() if p != EQ}
    return Domain(size, consts, preds)


def effective_bounds(bounds: SearchBounds, pinned: Optional[Template], formulas) -> SearchBounds:
    """Fill template defaults and the automatic sample mode."""
    if bounds.access is None:
        bounds = replace(bounds, access=(pinned and pinned.access) or "derived")
    if pinned is not None and pinned.sample and bounds.sample is None:
        bounds = replace(bounds, sample=pinned.sample)
    if bounds.sample is None:
        agents = set()
        for f in formulas:
            agents |= agents_in(f)
        sample = f"cell:{next(iter(agents))}" if len(agents) == 1 else "full"
        bounds = replace(bounds, sample=sample)
    return bounds


def _prepare(premises, conclusion, sig, bounds):
    for f in list(premises) + [conclusion]:
        diags = well_formed(f, sig)
        if diags:
            raise UsageError("; ".join(str(d) for d in diags))
    if bounds.sample and bounds.sample.startswith("cell:") and bounds.sample[5:] not in sig.agents:
        raise UsageError(f"sample cell of undeclared agent {bounds.sample[5:]}")
    return [expand_derived(p) for p in premises], expand_derived(conclusion)


def _verify(m: KripkeModel, world: str, premises, conclusion, access: str):
    mode = "s5_required"
    diags = errors(validate_model(m, mode))
    if diags:
        raise AssertionError(f"witness fails validation: {diags}")
    if not all(valid_in_model(m, p) for p in premises) or satisfies(m, world, conclusion):
        raise AssertionError("witness does not refute the obligation")


def find_countermodel(premises: Sequence[Formula], conclusion: Formula, sig: Signature,
                      pinned: Optional[Template] = None, bounds: SearchBounds = SearchBounds(),
                      engine: str = "sat", stats: Optional[Stats] = None):
    """First countermodel in canonical order as ``(model, world)``, or ``None``.

    Raises :class:`SearchTimeout` when the deadline passes.
    """
    bounds = effective_bounds(bounds, pinned, list(premises) + [conclusion])
    prem, concl = _prepare(premises, conclusion, sig, bounds)
    dom = resolve_domain(sig, pinned, bounds)
    stats = stats if stats is not None else Stats()
    deadline = None if bounds.timeout is None else time.monotonic() + bounds.timeout

    if engine == "enumerate":
        for skel in enumerate_structures(sig, dom, bounds):
            if deadline is not None and time.monotonic() > deadline:
                raise SearchTimeout()
            stats.structures += 1
            m = guess_and_check(sig, skel, prem, concl, bounds.access == "derived", stats)
            if m is not None:
                world = next(w for w in m.worlds if not satisfies(m, w, concl))
                _verify(m, world, prem, concl, bounds.access)
                return m, world
        return None
    if engine != "sat":
        raise ValueError(f"unknown engine {engine!r}")

    for n in range(1, bounds.max_worlds + 1):
        search = GroundSearch(sig, dom, n, bounds.access, bounds.sample, prem, concl, deadline, stats)
        try:
            found = search.minimal_countermodel()
            if found is not None:
                m = search.build_model(*found)
                _verify(m, m.worlds[0], prem, concl, bounds.access)
                return m, m.worlds[0]
        finally:
            search.close()
    return None


def entails_global(premises: Sequence[Formula], conclusion: Formula, sig: Signature,
                   pinned: Optional[Template] = None, bounds: SearchBounds = SearchBounds(),
                   engine: str = "sat") -> CheckResult:
    """Does every model within bounds that validates the premises also validate the conclusion?"""
    start = time.monotonic()
    eff = effective_bounds(bounds, pinned, list(premises) + [conclusion])
    stats = Stats()
    try:
        found = find_countermodel(premises, conclusion, sig, pinned, eff, engine, stats)
    except SearchTimeout:
        return CheckResult(Verdict.UNKNOWN, stats=stats, elapsed=time.monotonic() - start, bounds=eff)
    elapsed = time.monotonic() - start
    if found is None:
        return CheckResult(Verdict.VALID, stats=stats, elapsed=elapsed, bounds=eff)
    m, w = found
    return CheckResult(Verdict.COUNTERMODEL, m, w, stats, elapsed, eff)
