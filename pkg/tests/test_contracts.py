import pytest

from kontrakt.contracts import (
    CompositionError, Contract, Specification, check_decomposition, compose_contracts, compose_spec,
    conjoin_spec, decomposition_obligations, quotient_contracts, quotient_spec, refines_contract, refines_spec,
    relativized_refines, saturate, verify_implementation,
)
from kontrakt.logic import And, Bottom, Implies, Not, Or, Pred, Signature, Top, prob, prob_cmp
from kontrakt.search import SearchBounds, Verdict, entails_global

import properties as P
from oracles import truth_table

SIG = Signature.build(["u"], predicates={"p": 0, "q": 0, "g": 0, "a": 0})
p, q, g, a = (Pred(n, ()) for n in ("p", "q", "g", "a"))
B = SearchBounds(max_worlds=2, max_anon=0)


def spec(f, sig=SIG):
    return Specification(sig, f)


def test_compose_and_conjoin():
    for op in (compose_spec, conjoin_spec):
        assert op(spec(p), spec(q)) == spec(And(p, q))
        s1 = spec(p, Signature.build(["u"], predicates={"p": 0}))
        s2 = spec(q, Signature.build(["u"], predicates={"q": 0}))
        assert op(s1, s2).sig.predicates.keys() >= {"p", "q"}
        with pytest.raises(CompositionError, match="p"):
            op(s1, Specification(Signature.build(["u"], predicates={"p": 2}), Top()))


def test_specification_checks_well_formedness():
    with pytest.raises(ValueError):
        spec(Pred("zz", ()))


def test_spec_quotient_examples():
    t, s = spec(q), spec(p)
    quo = quotient_spec(t, s)
    assert quo.phi == Implies(p, q)
    assert refines_spec(compose_spec(s, quo), t, B).verdict is Verdict.VALID
    assert entails_global([], quotient_spec(t, t).phi, SIG, bounds=B).verdict is Verdict.VALID


def test_refines_spec_examples():
    small = Signature.build(["u"], predicates={"p": 0})
    assert refines_spec(spec(And(p, q)), spec(p, small), B).verdict is Verdict.VALID
    assert refines_spec(spec(p, small), spec(p), B).verdict is Verdict.NOT_APPLICABLE
    r = refines_spec(spec(prob_cmp([prob(p)], ">=", "2/3")), spec(prob_cmp([prob(p)], ">=", "1/2")), B)
    assert r.verdict is Verdict.VALID


def test_relativized_examples():
    assert relativized_refines(spec(p), spec(Or(p, q)), spec(g), B).ok
    assert relativized_refines(spec(p), spec(q), spec(Implies(p, q)), B).ok
    assert relativized_refines(spec(p), spec(q), spec(Top()), B).verdict is Verdict.COUNTERMODEL


def test_saturate_examples():
    c = saturate(Contract(SIG, Top(), g))
    assert c.guarantee == Implies(Top(), g)
    assert saturate(c) == c
    vac = saturate(Contract(SIG, Bottom(), g))
    assert entails_global([], vac.guarantee, SIG, bounds=B).ok


def test_refines_contract_examples():
    c1 = Contract(SIG, p, Implies(p, g))
    c2 = Contract(SIG, And(p, q), Implies(And(p, q), g))
    assert refines_contract(c1, c2, B).ok
    assert refines_contract(c1, c1, B).ok
    r = refines_contract(c2, c1, B)
    assert r.verdict is Verdict.COUNTERMODEL
    assert "failing part: assumption" in r.diagnostics


def test_compose_contracts_examples():
    c1, c2 = saturate(Contract(SIG, a, g)), saturate(Contract(SIG, Top(), q))
    comp = compose_contracts(c1, c2)
    assert Implies(c2.guarantee, a) == comp.assume.left


def test_quotient_self_admits_trivial_implementation():
    c = Contract(SIG, a, g)
    quo = quotient_contracts(c, c)
    s = saturate(c)
    assert entails_global([s.assume, s.guarantee], quo.guarantee, SIG, bounds=B).ok


def test_verify_implementation_examples():
    c = Contract(SIG, a, g)
    assert verify_implementation(spec(g), c, B).ok
    assert verify_implementation(spec(Top()), c, B).verdict is Verdict.COUNTERMODEL


def test_decomposition_obligation_shape():
    top = Contract(SIG, a, g)
    parts = [Contract(SIG, p, q), Contract(SIG, q, g)]
    obs = decomposition_obligations(top, parts, theory=[Not(Bottom())], names=["P1", "P2"])
    assert [o.label for o in obs] == ["guarantee", "assumption of P1", "assumption of P2"]
    assert saturate(top).assume in obs[0].premises
    strict = decomposition_obligations(top, parts, strict=True)
    assert saturate(top).assume not in strict[0].premises
    assert obs[1].conclusion == p and saturate(parts[1]).guarantee in obs[1].premises


def test_decomposition_order_independent_of_jobs():
    top = Contract(SIG, a, g)
    parts = [Contract(SIG, a, q), Contract(SIG, q, g)]
    one = check_decomposition(top, parts, bounds=B, jobs=1)
    many = check_decomposition(top, parts, bounds=B, jobs=3)
    assert [r.label for r in one.results] == [r.label for r in many.results]
    assert [r.verdict for r in one.results] == [r.verdict for r in many.results]
    assert one.verdict is Verdict.VALID
    broken = check_decomposition(top, [Contract(SIG, a, q), Contract(SIG, p, g)], bounds=B, jobs=2)
    assert [r.verdict for r in broken.results] == [Verdict.COUNTERMODEL, Verdict.VALID, Verdict.COUNTERMODEL]


def test_compositionality():
    bad, used = P.compositionality_violations()
    assert bad == 0 and used > 500000


def test_refinement_preorder():
    bad, _ = P.preorder_violations()
    assert bad == 0


def test_saturation_equivalence():
    assert P.saturation_violations()[0] == 0


def test_spec_quotient():
    assert P.spec_quotient_violations()[0] == 0


def test_contract_quotient_adjunction():
    out = P.quotient_adjunction_violations()
    assert out["forward"] == 0 and out["backward"] == 0
    assert out["forward_instances"] > 100
    exhaustive = P.exhaustive_adjunction_violations()
    assert exhaustive["forward"] == 0 and exhaustive["backward"] == 0


def test_compose_with_trivial():
    assert P.trivial_composition_violations()[0] == 0


def test_relativized_reduction():
    assert P.relativized_violations()[0] == 0


def test_truth_table_of_saturated_guarantee():
    atoms = ["a", "g"]
    assert truth_table(saturate(Contract(SIG, a, g)).guarantee, atoms) == truth_table(Or(Not(a), g), atoms)
