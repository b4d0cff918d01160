"""Property suites returning violation counts; used by module tests and the acceptance run."""

from __future__ import annotations

import random
from fractions import Fraction
from itertools import product

from kontrakt.enumerate import enumerate_structures, grid_countermodel, guess_and_check
from kontrakt.fm import LE, LT, Constraint, LinearSystem, feasible
from kontrakt.ground import Domain
from kontrakt.kripke import Evaluator, measure, satisfies, valid_in_model
from kontrakt.logic import (
    And, Knows, Not, Or, Pred, ProbCmp, ProbLeq, ProbTerm, Signature, Top, expand_derived,
)
from kontrakt.search import SearchBounds

from oracles import (
    all_s5_models, formula_of, grid_has_point, leq, prop_signature, random_modal, random_model, random_prop,
    small_modal_formulas, truth_table,
)

# ---------------------------------------------------------------------------
# Semantics
# ---------------------------------------------------------------------------


def s5_violations(models, formulas, agents=("a", "b")) -> int:
    """T, positive and negative introspection at every world."""
    bad = 0
    for m in models:
        ev = Evaluator(m)
        for f in formulas:
            core = expand_derived(f)
            for a in agents:
                k = Knows(a, core)
                for w in m.worlds:
                    if ev.sat(w, k) and not ev.sat(w, core):
                        bad += 1
                    if ev.sat(w, k) and not ev.sat(w, Knows(a, k)):
                        bad += 1
                    if not ev.sat(w, k) and not ev.sat(w, Knows(a, Not(k))):
                        bad += 1
    return bad


def exhaustive_s5_violations() -> tuple:
    models = list(all_s5_models(3))
    return s5_violations(models, small_modal_formulas()), len(models)


def random_s5_violations(n: int = 1000, seed: int = 7) -> int:
    rng = random.Random(seed)
    bad = 0
    for _ in range(n):
        m = random_model(rng)
        bad += s5_violations([m], [random_modal(rng, depth=2)])
    return bad


def necessitation_violations(n: int = 1000, seed: int = 11) -> tuple:
    """(violations, number of instances where the premise was valid)."""
    rng = random.Random(seed)
    bad = used = 0
    for i in range(n):
        m = random_model(rng)
        f = random_modal(rng, depth=2)
        if i % 2:  # half the instances are valid by construction
            f = Or(f, Not(f))
        if valid_in_model(m, f):
            used += 1
            for a in sorted(m.agents):
                if not valid_in_model(m, Knows(a, f)):
                    bad += 1
    return bad, used


def complement_violations(n: int = 1000, seed: int = 13) -> int:
    rng = random.Random(seed)
    bad = 0
    for _ in range(n):
        m = random_model(rng)
        f = random_modal(rng, depth=2)
        w = rng.choice(m.worlds)
        if measure(m, w, f) + measure(m, w, Not(f)) != 1:
            bad += 1
    return bad


def monotonicity_violations(n: int = 300, seed: int = 17) -> int:
    rng = random.Random(seed)
    bad = 0
    for _ in range(n):
        m = random_model(rng)
        f, g = random_modal(rng, depth=2), random_modal(rng, depth=2)
        stronger = And(f, g)  # pointwise entails f
        for w in m.worlds:
            if measure(m, w, stronger) > measure(m, w, f):
                bad += 1
    return bad


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------


def random_system(rng: random.Random) -> LinearSystem:
    dim = rng.randint(1, 3)
    rows = []
    for _ in range(rng.randint(1, 5)):
        coeffs = tuple(Fraction(rng.randint(-3, 3)) for _ in range(dim))
        bound = Fraction(rng.randint(-6, 6), rng.choice([1, 2, 3, 4]))
        rows.append(Constraint(coeffs, rng.choice([LE, LT]), bound))
    return LinearSystem(tuple(f"x{i}" for i in range(dim)), tuple(rows))


def fm_disagreements(n: int = 500, seed: int = 3, max_den: int = 12) -> int:
    """Feasible: the point satisfies every row. Infeasible: no grid point does."""
    rng = random.Random(seed)
    bad = 0
    for _ in range(n):
        sys = random_system(rng)
        point = feasible(sys)
        if point is not None:
            if not sys.satisfied_by([point[v] for v in sys.variables]):
                bad += 1
        elif grid_has_point(sys, max_den):
            bad += 1
    return bad


def grid_obligations():
    """Obligations over two nullary predicates with at most two probability atoms.

    Coefficients are +-1 and bounds have denominators 1, 2 or 3, so every feasible
    region over at most two worlds contains a point with denominator at most 8.
    """
    p, q = Pred("p", ()), Pred("q", ())
    bodies = [p, q, And(p, q), Not(p)]
    bounds = [Fraction(0), Fraction(1, 3), Fraction(1, 2), Fraction(2, 3), Fraction(1)]
    atoms = []
    for body in bodies:
        for b in bounds:
            atoms.append(ProbLeq((ProbTerm(Fraction(1), None, body),), b))
            atoms.append(ProbCmp((ProbTerm(Fraction(1), None, body),), "<", b))
            atoms.append(ProbCmp((ProbTerm(Fraction(1), None, body),), ">=", b))
    atoms.append(ProbLeq((ProbTerm(Fraction(1), None, p), ProbTerm(Fraction(-1), None, q)), Fraction(-1, 3)))
    atoms.append(ProbCmp((ProbTerm(Fraction(1), None, p), ProbTerm(Fraction(1), None, q)), ">", Fraction(4, 3)))
    rng = random.Random(5)
    out = []
    for _ in range(60):
        a1, a2 = rng.choice(atoms), rng.choice(atoms)
        shape = rng.randrange(4)
        if shape == 0:
            out.append(([a1], a2))
        elif shape == 1:
            out.append(([], Or(a1, a2)))
        elif shape == 2:
            out.append(([a1], Knows("u", a2)))
        else:
            out.append(([Or(p, a1)], Or(q, a2)))
    return out


def guess_grid_disagreements() -> tuple:
    """(disagreements, skeletons compared) between guess-and-check and the weight grid."""
    sig = Signature.build(["u"], predicates={"p": 0, "q": 0}, owner={"p": "u"})
    dom = Domain(1, {}, {})
    bad = compared = 0
    for sample in ("full", "cell:u", "free"):
        bounds = SearchBounds(max_worlds=2, max_anon=0, access="derived", sample=sample)
        skeletons = list(enumerate_structures(sig, dom, bounds))
        for premises, conclusion in grid_obligations():
            prem = [expand_derived(f) for f in premises]
            concl = expand_derived(conclusion)
            for skel in skeletons:
                compared += 1
                symbolic = guess_and_check(sig, skel, prem, concl, True) is not None
                gridded = grid_countermodel(sig, skel, prem, concl, True, max_den=8) is not None
                if symbolic != gridded:
                    bad += 1
    return bad, compared


def verify_witness(m, world, premises, conclusion) -> bool:
    return all(valid_in_model(m, p) for p in premises) and not satisfies(m, world, conclusion)


# ---------------------------------------------------------------------------
# Contract algebra on the propositional fragment, decided by truth tables
# ---------------------------------------------------------------------------


ATOMS2 = ("p", "q")
ATOMS4 = ("p", "q", "r", "s")


def _spec(f, atoms):
    from kontrakt.contracts import Specification
    return Specification(prop_signature(atoms), f)


def _contract(a, g, atoms):
    from kontrakt.contracts import Contract
    return Contract(prop_signature(atoms), a, g)


def _contract_masks(c, atoms):
    """(assumption, saturated guarantee) truth tables."""
    from kontrakt.contracts import saturate
    s = saturate(c)
    return truth_table(s.assume, atoms), truth_table(s.guarantee, atoms)


def contract_leq(c1, c2, atoms) -> bool:
    a1, g1 = _contract_masks(c1, atoms)
    a2, g2 = _contract_masks(c2, atoms)
    return leq(a2, a1) and leq(g1, g2)


def _all_formulas(atoms):
    return [formula_of(mask, atoms) for mask in range(1 << (1 << len(atoms)))]


def _random_formulas(rng, atoms, n):
    return [random_prop(rng, atoms) for _ in range(n)]


def compositionality_violations(n_random: int = 3000, seed: int = 31) -> tuple:
    """S <= S' and T <= T' imply S (x) T <= S' (x) T'.

    Exhaustive on 3 atoms: every S <= S' is a chain of single-row additions, so
    checking each such step on each side covers all pairs. Random on 4 atoms.
    """
    from kontrakt.contracts import compose_spec
    bad = used = 0
    atoms = ATOMS4[:3]
    rows = 1 << len(atoms)
    n = 1 << rows
    specs = [_spec(formula_of(m, atoms), atoms) for m in range(n)]
    composed = [[truth_table(compose_spec(specs[i], specs[j]).phi, atoms) for j in range(n)] for i in range(n)]
    for i in range(n):
        for j in range(n):
            here = composed[i][j]
            for r in range(rows):
                bit = 1 << r
                if not i & bit:
                    used += 1
                    bad += not leq(here, composed[i | bit][j])
                if not j & bit:
                    used += 1
                    bad += not leq(here, composed[i][j | bit])
    rng = random.Random(seed)
    for _ in range(n_random):
        s, t = random_prop(rng, ATOMS4), random_prop(rng, ATOMS4)
        # weaken by disjoining a random formula so the premise holds by construction
        s2, t2 = Or(s, random_prop(rng, ATOMS4)), Or(t, random_prop(rng, ATOMS4))
        used += 1
        lhs = compose_spec(_spec(s, ATOMS4), _spec(t, ATOMS4)).phi
        rhs = compose_spec(_spec(s2, ATOMS4), _spec(t2, ATOMS4)).phi
        if not leq(truth_table(lhs, ATOMS4), truth_table(rhs, ATOMS4)):
            bad += 1
    return bad, used


def preorder_violations(n: int = 60, seed: int = 37) -> tuple:
    """Reflexivity and transitivity of refines_spec verdicts, and agreement with truth tables."""
    from kontrakt.contracts import refines_spec
    rng = random.Random(seed)
    bounds = SearchBounds(max_worlds=1, max_anon=0)
    atoms = ATOMS4[:3]
    forms = _random_formulas(rng, atoms, n)
    specs = [_spec(f, atoms) for f in forms]
    masks = [truth_table(f, atoms) for f in forms]
    rel = {}
    bad = 0
    for i in range(n):
        for j in range(n):
            ok = refines_spec(specs[i], specs[j], bounds).ok
            rel[i, j] = ok
            if ok != leq(masks[i], masks[j]):
                bad += 1
    for i in range(n):
        if not rel[i, i]:
            bad += 1
        for j in range(n):
            if not rel[i, j]:
                continue
            for k in range(n):
                if rel[j, k] and not rel[i, k]:
                    bad += 1
    return bad, n * n


def saturation_violations() -> tuple:
    """I <=_A G iff I <= A -> G, and saturating twice changes nothing; exhaustive on 2 atoms."""
    from kontrakt.contracts import saturate
    forms = _all_formulas(ATOMS2)
    masks = [truth_table(f, ATOMS2) for f in forms]
    bad = used = 0
    for a, am in zip(forms, masks):
        for g, gm in zip(forms, masks):
            c = _contract(a, g, ATOMS2)
            once = saturate(c)
            twice = saturate(once)
            sat_mask = truth_table(once.guarantee, ATOMS2)
            if truth_table(twice.guarantee, ATOMS2) != sat_mask or truth_table(once.assume, ATOMS2) != am:
                bad += 1
            for im in masks:
                used += 1
                if leq(im & am, gm) != leq(im, sat_mask):
                    bad += 1
    return bad, used


def spec_quotient_violations(n_random: int = 200, seed: int = 41) -> tuple:
    """S (x) (T/S) <= T, and every X with S (x) X <= T refines T/S."""
    from kontrakt.contracts import compose_spec, quotient_spec
    bad = used = 0
    forms = _all_formulas(ATOMS2)
    masks = [truth_table(f, ATOMS2) for f in forms]
    for s, sm in zip(forms, masks):
        for t, tm in zip(forms, masks):
            S, T = _spec(s, ATOMS2), _spec(t, ATOMS2)
            Q = quotient_spec(T, S)
            qm = truth_table(Q.phi, ATOMS2)
            used += 1
            if not leq(truth_table(compose_spec(S, Q).phi, ATOMS2), tm):
                bad += 1
            for xm in masks:
                if leq(sm & xm, tm):
                    used += 1
                    if not leq(xm, qm):
                        bad += 1
    rng = random.Random(seed)
    found = 0
    while found < n_random:
        atoms = ATOMS4
        s, t, x = (random_prop(rng, atoms) for _ in range(3))
        sm, tm, xm = (truth_table(f, atoms) for f in (s, t, x))
        if not leq(sm & xm, tm):
            continue
        found += 1
        used += 1
        if not leq(xm, truth_table(quotient_spec(_spec(t, atoms), _spec(s, atoms)).phi, atoms)):
            bad += 1
    return bad, used


def _random_contract(rng, atoms):
    return _contract(random_prop(rng, atoms), random_prop(rng, atoms), atoms)


def quotient_adjunction_violations(n: int = 4000, seed: int = 43) -> dict:
    """C' <= C1/C2 iff C' (x) C2 <= C1, counted separately per direction.

    ``forward`` counts C' with C' (x) C2 <= C1 but not C' <= C1/C2; ``backward`` the converse.
    """
    from kontrakt.contracts import compose_contracts, quotient_contracts
    rng = random.Random(seed)
    out = {"forward": 0, "backward": 0, "forward_instances": 0, "backward_instances": 0}
    for k in range(n):
        atoms = ATOMS4[:2 + k % 3]
        c1, c2, c = (_random_contract(rng, atoms) for _ in range(3))
        quo = quotient_contracts(c1, c2)
        comp_ok = contract_leq(compose_contracts(c, c2), c1, atoms)
        quo_ok = contract_leq(c, quo, atoms)
        if comp_ok:
            out["forward_instances"] += 1
            out["forward"] += not quo_ok
        if quo_ok:
            out["backward_instances"] += 1
            out["backward"] += not comp_ok
    return out


def exhaustive_adjunction_violations() -> dict:
    """The same adjunction over every contract triple on one atom (saturated forms)."""
    from kontrakt.contracts import compose_contracts, quotient_contracts
    atoms = ("p",)
    forms = _all_formulas(atoms)
    contracts = [_contract(a, g, atoms) for a in forms for g in forms]
    out = {"forward": 0, "backward": 0, "instances": 0}
    for c1 in contracts:
        for c2 in contracts:
            quo = quotient_contracts(c1, c2)
            for c in contracts:
                out["instances"] += 1
                comp_ok = contract_leq(compose_contracts(c, c2), c1, atoms)
                quo_ok = contract_leq(c, quo, atoms)
                out["forward"] += comp_ok and not quo_ok
                out["backward"] += quo_ok and not comp_ok
    return out


def trivial_composition_violations() -> tuple:
    """Composing with (true, true) is semantically the identity; exhaustive on 2 atoms."""
    from kontrakt.contracts import compose_contracts
    forms = _all_formulas(ATOMS2)
    trivial = _contract(Top(), Top(), ATOMS2)
    bad = used = 0
    for a in forms:
        for g in forms:
            c = _contract(a, g, ATOMS2)
            used += 1
            if _contract_masks(compose_contracts(c, trivial), ATOMS2) != _contract_masks(c, ATOMS2):
                bad += 1
    return bad, used


def relativized_violations(n: int = 150, seed: int = 47) -> tuple:
    """The reduced check e & s |= t against the definition over every E' <= E (2 atoms)."""
    from kontrakt.contracts import relativized_refines
    rng = random.Random(seed)
    masks = list(range(16))
    bounds = SearchBounds(max_worlds=1, max_anon=0)
    bad = 0
    for _ in range(n):
        sm, tm, em = rng.choice(masks), rng.choice(masks), rng.choice(masks)
        # S <=_E T iff S (x) E' <= T (x) E' for every E' <= E
        definitional = all(leq(sm & xm, tm & xm) for xm in masks if leq(xm, em))
        S, T, E = (_spec(formula_of(m, ATOMS2), ATOMS2) for m in (sm, tm, em))
        reduced = relativized_refines(S, T, E, bounds).ok
        if reduced != definitional:
            bad += 1
    return bad, n
