import random
from fractions import Fraction

import pytest

from kontrakt.enumerate import enumerate_structures
from kontrakt.ground import Domain
from kontrakt.kripke import satisfies, valid_in_model
from kontrakt.logic import And, Forall, Implies, Knows, Not, Pred, Bound, Signature, prob, prob_cmp
from kontrakt.search import SearchBounds, UsageError, Verdict, entails_global, find_countermodel
from kontrakt.surface import witness_unit

from oracles import random_modal

p, q = Pred("p", ()), Pred("q", ())
SIG = Signature.build(["u", "e"], predicates={"p": 0, "q": 0, "dist": 0})
ALPHA = Fraction(99, 100)


def check(premises, conclusion, sig=SIG, engine="sat", **kw):
    return entails_global(premises, conclusion, sig, bounds=SearchBounds(**kw), engine=engine)


def test_conjunction_elimination():
    assert check([And(p, q)], p).verdict is Verdict.VALID


def test_bound_monotone():
    r = check([prob_cmp([prob(p)], ">=", "2/3")], prob_cmp([prob(p)], ">=", "1/2"))
    assert r.verdict is Verdict.VALID


def test_complement_bound():
    dist = Pred("dist", ())
    r = check([prob_cmp([prob(dist)], ">=", ALPHA)], prob_cmp([prob(Not(dist))], "<=", 1 - ALPHA))
    assert r.verdict is Verdict.VALID


def test_knowledge_transfer_global_and_pointwise():
    ku, ke = Knows("u", p), Knows("e", p)
    # as a global consequence, K_u p valid forces p everywhere, hence K_e p
    assert check([ku], ke, access="free_s5").verdict is Verdict.VALID
    # the pointwise reading fails on two worlds
    r = check([], Implies(ku, ke), access="free_s5")
    assert r.verdict is Verdict.COUNTERMODEL
    assert len(r.witness.worlds) == 2
    assert satisfies(r.witness, r.world, ku) and not satisfies(r.witness, r.world, ke)


def test_smallest_falsifier():
    m, w = find_countermodel([], p, SIG)
    assert m.worlds == ("w1",) and not satisfies(m, w, p)


def test_valid_obligation_has_no_countermodel():
    assert find_countermodel([p], p, SIG) is None


def test_witness_reverifies():
    r = check([Implies(p, q)], And(p, q))
    assert r.verdict is Verdict.COUNTERMODEL
    assert valid_in_model(r.witness, Implies(p, q)) and not satisfies(r.witness, r.world, And(p, q))


def test_ill_formed_input_is_usage_error():
    with pytest.raises(UsageError):
        check([], Pred("nope", ()))


def test_timeout_gives_unknown():
    sig = Signature.build(["u"], predicates={"r": 2}, state_variables=["x"], owner={"x": "u"})
    f = Forall("v", Pred("r", (Bound("v"), Bound("v"))))
    r = entails_global([], Knows("u", f), sig, bounds=SearchBounds(max_worlds=3, max_anon=3, timeout=0))
    assert r.verdict is Verdict.UNKNOWN and r.witness is None


def test_enumerate_single_predicate():
    sig = Signature.build(["u"], predicates={"p": 0})
    skels = list(enumerate_structures(sig, Domain(1, {}, {}), SearchBounds(max_worlds=1, access="derived",
                                                                             sample="full")))
    assert len(skels) == 2


def test_enumerate_free_s5_two_worlds():
    sig = Signature.build(["u"])
    skels = list(enumerate_structures(sig, Domain(1, {}, {}), SearchBounds(max_worlds=2, access="free_s5",
                                                                             sample="full")))
    two = {s.access["u"] for s in skels if len(s.worlds) == 2}
    identity = frozenset({("w1", "w1"), ("w2", "w2")})
    total = frozenset((a, b) for a in ("w1", "w2") for b in ("w1", "w2"))
    assert two == {identity, total}


def test_enumerate_respects_pinning():
    sig = Signature.build(["u"], predicates={"p": 1, "g": 1}, rigid=["g"])
    dom = Domain(2, {}, {"g": frozenset({(0,)})})
    skels = list(enumerate_structures(sig, dom, SearchBounds(max_worlds=1, access="derived", sample="full")))
    assert len(skels) == 4
    assert all(s.interps[0].preds["g"] == frozenset({(0,)}) for s in skels)


def test_deterministic_witness():
    f = Implies(Knows("u", p), prob_cmp([prob(q)], ">", "1/2"))
    texts = set()
    for _ in range(3):
        r = check([], f, access="free_s5")
        texts.add(witness_unit(r.witness, r.world))
    assert len(texts) == 1


def test_sat_and_enumerate_agree():
    rng = random.Random(21)
    sig = Signature.build(["a", "b"], predicates={"p": 0, "q": 0})
    for _ in range(40):
        prem = [random_modal(rng, depth=2)] if rng.random() < 0.5 else []
        concl = random_modal(rng, depth=2)
        for sample in ("full", "cell:a"):
            kw = dict(max_worlds=2, max_anon=0, access="free_s5", sample=sample)
            a = check(prem, concl, sig, "sat", **kw).verdict
            b = check(prem, concl, sig, "enumerate", **kw).verdict
            assert a is b, (prem, concl, sample)
