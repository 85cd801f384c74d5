import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from critset.criterion import (
    ALL,
    T_TABLE,
    CriterionError,
    CriticalWitness,
    EscalationFailure,
    SSpec,
    certify_critical,
    check_dominated_integrality,
    check_factor_condition,
    closure_parity_check,
    criterion_candidates,
    diag_universal_from_candidates,
    escalate_witness,
    exception_form,
    is_inert,
    kronecker,
    truants,
)
from critset.elements import class_of, elements_of_norm, indec_sequence, square_divisor
from critset.forms import diag_form, find_representation, non_represented_up_to, zero_form
from critset.ring import QQ, exact_quotient, make_field

import oracles

K2, K3, K5 = make_field(2), make_field(3), make_field(5)


def cls(K, a, b=0):
    return class_of(K.elem(a, b))


def test_sspec_variants():
    K = K5
    one, two, three = cls(K, 1), cls(K, 2), cls(K, 3)
    assert ALL.contains(three) and not ALL.minus(three).contains(three)
    s = SSpec.of_classes([one, two])
    assert s.contains(two) and not s.contains(three)
    assert SSpec("rational").contains(three) and not SSpec("rational").contains(cls(K, 2, 1))
    assert not SSpec("squarefree").contains(cls(K, 4))
    assert ALL.minus(one).tag == "ALL-minus[1:0]"
    with pytest.raises(CriterionError):
        SSpec("odd")


@pytest.mark.parametrize("n", sorted(T_TABLE))
def test_T_forms_have_truant_n(n):
    f = diag_form(QQ, list(T_TABLE[n])) if T_TABLE[n] else zero_form(QQ)
    rep = truants(f, ALL, 200)
    assert rep.truant_norm == n and [c.rep.a for c in rep.truants] == [n]


def test_truants_tie_and_none():
    # sums of squares over Q(sqrt5) first miss 2
    rep = truants(diag_form(K5, [1]), ALL, 10)
    assert rep.truant_norm == 4 and str(rep.canonical_truant) == "[2]"
    rep = truants(diag_form(QQ, [1, 1, 1, 1]), ALL, 300)
    assert rep.truant_norm is None and rep.truants == []
    rep = truants(diag_form(K5, [1, 2]), ALL, 50)
    assert all(c.norm == rep.truant_norm for c in rep.truants)
    assert rep.truants == sorted(rep.truants)


def test_escalation_trail_invariants():
    alpha = cls(QQ, 15)
    w = escalate_witness(diag_form(QQ, [1, 2, 5, 5]), alpha, ALL, 300)
    assert isinstance(w, CriticalWitness)
    assert find_representation(w.witness_form, alpha.rep) is None
    assert [c.rep.a for c in non_represented_up_to(w.witness_form, None, 300)] == [15]
    assert all(c.norm >= alpha.norm for c in w.escalation_trail)


def test_escalation_needs_truant_start():
    with pytest.raises(CriterionError):
        escalate_witness(diag_form(QQ, [1]), cls(QQ, 3), ALL, 50)
    with pytest.raises(CriterionError):
        escalate_witness(zero_form(QQ), cls(QQ, 1), ALL.minus(cls(QQ, 1)), 50)


def test_escalation_step_limit_is_inconclusive():
    r = escalate_witness(diag_form(QQ, [1, 1, 1]), cls(QQ, 7), ALL, 2000, max_steps=0)
    assert isinstance(r, EscalationFailure) and r.status == "inconclusive"


def test_certify_squarefree_dichotomy():
    ok = certify_critical(cls(K5, 2), "diag", 100)
    assert isinstance(ok, CriticalWitness)
    bad = certify_critical(cls(K2, 2), "diag", 100)
    assert bad.status == "rejected-not-squarefree"
    w = bad.square_witness
    assert abs(w.norm()) == 2 and exact_quotient(w * w, K2.elem(2)) is not None


def test_certify_reports_inconclusive():
    r = certify_critical(cls(QQ, 11), "diag", 60)
    assert isinstance(r, EscalationFailure) and r.status == "no-witness-found" and r.attempts


def test_rational_candidates_per_X():
    want = [1, 2, 3, 5, 6, 7, 10, 14, 15]
    diag = criterion_candidates(QQ, "diag", 15)
    cl = criterion_candidates(QQ, "cl", 15)
    nc = criterion_candidates(QQ, "nc", 15)
    assert [c.rep.a for c in diag.classes] == want
    assert [c.rep.a for c in cl.classes] == want
    assert [c.rep.a for c in nc.classes] == [1, 2, 3, 5, 6, 7, 10, 13, 14, 15]
    assert [f.alpha.rep.a for f in nc.failures] == [11]


@pytest.mark.parametrize("D,keys", [
    (2, [(1, 0), (2, 1), (3, 0)]),
    (3, [(1, 0), (2, 1)]),
    (5, [(1, 0), (2, 0), (2, 1), (3, 1), (3, 2)]),
])
def test_quadratic_candidates_frozen(D, keys):
    c = criterion_candidates(make_field(D), "diag", 12)
    assert [x.key for x in c.classes] == keys
    for x in c.classes:
        assert square_divisor(x.rep) is None
    assert c.closure["sigma_closed"] and not c.closure["violations"]


def test_closure_for_totally_positive_unit():
    c = criterion_candidates(K3, "diag", 6)
    rep = closure_parity_check(c)
    assert rep["unit_closed"] and rep["even"]


def test_diag_universal_from_candidates():
    c = criterion_candidates(QQ, "diag", 15)
    f, rep = diag_universal_from_candidates(c, 2000)
    assert rep["universal_up_to_bound"] and f.rank == 9


def test_exception_form_golden_field():
    f = exception_form(cls(K5, 1))
    assert [c.key for c in non_represented_up_to(f, None, 150)] == [(1, 0)]


@pytest.mark.parametrize("K", [K2, K3, make_field(6)])
def test_exception_forms_miss_exactly_beta(K):
    seq = indec_sequence(K)
    for k in range(seq.t):
        b = class_of(seq.beta(k))
        if square_divisor(b.rep) is not None:
            continue
        missed = non_represented_up_to(exception_form(b), None, 120)
        assert [c.key for c in missed] == [b.key]


def test_exception_form_rejects():
    with pytest.raises(CriterionError):
        exception_form(cls(K5, 2))  # decomposable
    with pytest.raises(CriterionError):
        exception_form(cls(QQ, 1))


def test_dominated_integrality():
    r = check_dominated_integrality(K5.elem(3), "elements")
    assert not r.holds and str(r.witness) == "(3+√5)/2"
    assert check_dominated_integrality(K2.elem(2), "elements").holds
    assert check_dominated_integrality(K5.elem(2), "squares").holds
    with pytest.raises(CriterionError):
        check_dominated_integrality(K5.elem(2), "cubes")


@pytest.mark.parametrize("D", [2, 3, 5, 7, 13])
def test_kronecker_matches_residues(D):
    K = make_field(D)
    for p in oracles.primes_upto(100):
        if p == 2:
            d = K.discriminant
            want = 0 if d % 2 == 0 else (1 if d % 8 in (1, 7) else -1)
        else:
            want = oracles.legendre(K.discriminant, p)
        assert kronecker(K.discriminant, p) == want
        # inert means no element has norm +-p
        assert is_inert(K, p) == (want == -1)
        if want == -1:
            assert not elements_of_norm(K, p)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([2, 3, 5, 7]), st.integers(1, 80))
def test_factor_condition_tiers_agree(D, m):
    K = make_field(D)
    auto = check_factor_condition(K, m, "auto")
    exact = check_factor_condition(K, m, "exact")
    if auto.holds:
        assert exact.holds
    assert auto.holds == exact.holds or auto.tier == "exact"


def test_factor_condition_examples():
    assert check_factor_condition(K5, 1).holds
    r = check_factor_condition(K2, 2, "exact")
    assert not r.holds and abs(r.witness.norm()) == 2
    assert check_factor_condition(K5, 3).tier == "inert"
    with pytest.raises(CriterionError):
        check_factor_condition(K5, 0)


def test_classes_enumerated_for_candidates_are_squarefree_only():
    c = criterion_candidates(K2, "diag", 9)
    assert (2, 0) not in {x.key for x in c.classes}
    assert all(square_divisor(x.rep) is None for x in c.classes)


def test_rational_class_without_transfer_is_undetermined():
    r = certify_critical(cls(K5, 3), "diag", 60)
    assert r.status == "undetermined" and "(3+√5)/2" in r.reason
