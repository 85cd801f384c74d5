"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
Bounded surrogates are labelled with the bound they were checked to.
"""

from __future__ import annotations

import io
import random
import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import oracles  # noqa: E402
from critset import cli  # noqa: E402
from critset.criterion import (  # noqa: E402
    ALL,
    T_TABLE,
    CriticalWitness,
    certify_critical,
    check_dominated_integrality,
    check_factor_condition,
    criterion_candidates,
    escalate_witness,
    exception_form,
    is_inert,
)
from critset.elements import (  # noqa: E402
    class_of,
    conjugate_class,
    enumerate_classes,
    indecomposable_classes,
    square_divisor,
)
from critset.forms import (  # noqa: E402
    FormError,
    diag_form,
    find_representation,
    gram_form,
    is_universal_up_to,
    lift_form,
    non_represented_up_to,
    orthogonal_sum,
    represented_classes,
    zero_form,
)
from critset.ring import QQ, make_field  # noqa: E402
from critset.ztree import build_tree, int_matrix, reduce_form, z_form  # noqa: E402

FIFTEEN = [1, 2, 3, 5, 6, 7, 10, 14, 15]


def report(n: int, ok: bool, what: str) -> bool:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:>2}: {what}"
    sys.__stdout__.write(line + "\n")
    sys.__stdout__.flush()
    return ok


def ac1():
    t0 = time.perf_counter()
    bad = []
    for n, coeffs in sorted(T_TABLE.items()):
        f = diag_form(QQ, list(coeffs)) if coeffs else zero_form(QQ)
        miss = non_represented_up_to(f, ALL, n)
        if [c.rep.a for c in miss] != [n]:
            bad.append(n)
    dt = time.perf_counter() - t0
    ok = not bad and dt < 1.0
    return ok, f"T_n has truant n for n in {sorted(T_TABLE)} ({dt:.2f}s){' bad ' + str(bad) if bad else ''}"


def ac2():
    cand = criterion_candidates(QQ, "diag", 15)
    got = [c.rep.a for c in cand.classes]
    _, stats = build_tree("cl", 4, 2000)
    rank4_new = sorted(set(stats.truants_per_rank[4]) - set(FIFTEEN))
    ok = got == FIFTEEN and stats.truants == FIFTEEN and not rank4_new
    return ok, (
        f"diag candidates to 15 = {got}; cl tree truants = {stats.truants}; "
        f"rank-4 truants {stats.truants_per_rank[4]} add nothing new (probe 2000)"
    )


def ac3():
    K = make_field(5)
    I4 = lift_form(diag_form(QQ, [1, 1, 1, 1]), K)
    f = lift_form(diag_form(QQ, [1, 1, 3, 3]), K)
    uni = is_universal_up_to(I4, None, 2000)
    rationals = all(find_representation(f, K.elem(n)) is not None for n in range(1, 51))
    seven = find_representation(f, K.elem(3, 1)) is None  # (7+sqrt5)/2
    return uni and rationals and seven, (
        f"Q(sqrt5): I4 universal to 2000 = {uni}; <1,1,3,3> gets 1..50 = {rationals}, misses (7+sqrt5)/2 = {seven}"
    )


def ac4():
    K = make_field(5)
    h = K.elem(2, 1)  # (5+sqrt5)/2
    known = [K.one, K.elem(2), h, K.elem(3, 1), K.elem(4, -1), h * 2, h * 3]
    extra = K.elem(3, -1)  # (5-sqrt5)/2
    classes = [class_of(x) for x in known]
    distinct = {c.key for c in classes}
    groups: dict = {}
    for x in known + [extra]:
        groups.setdefault(class_of(x).key, []).append(x)
    pairs = [g for g in groups.values() if len(g) > 1]
    sigma = {conjugate_class(c).key for c in classes} == distinct
    ok = (
        len(distinct) == 7
        and len(groups) == 7
        and sum(1 for g in groups.values() if len(g) == 1) == 6
        and len(pairs) == 1
        and set(pairs[0]) == {h, extra}
        and sigma
    )
    return ok, (
        f"classical Q(sqrt5) criterion set: 7 classes; with (5-sqrt5)/2 added, 6 singletons + pair "
        f"{{{', '.join(str(x) for x in pairs[0]) if pairs else ''}}}; sigma-stable = {sigma}"
    )


def ac5():
    details = []
    ok = True
    for D in (2, 3):
        K = make_field(D)
        betas = [c for c in indecomposable_classes(K, 50) if square_divisor(c.rep) is None]
        for beta in betas:
            smaller = [c.rep for c in enumerate_classes(K, beta.norm - 1)]
            start = diag_form(K, smaller) if smaller else zero_form(K)
            miss = non_represented_up_to(start, ALL, beta.norm)
            has = beta in [c for c in miss if c.norm == miss[0].norm] if miss else False
            w = escalate_witness(start, beta, ALL, 200) if has else None
            good = (
                isinstance(w, CriticalWitness)
                and find_representation(w.witness_form, beta.rep) is None
                and [c.key for c in non_represented_up_to(w.witness_form, None, 200)] == [beta.key]
            )
            ok &= good
            details.append(f"Q(sqrt{D}) {beta}:{'ok' if good else 'BAD'}")
    return ok, "smaller-class starts escalate to witnesses to 200: " + ", ".join(details)


def ac6():
    K5 = make_field(5)
    phi2 = K5.fund_unit ** 2
    J = [2, 2, 3, 4]
    D5 = diag_form(K5, J + J + [K5.one + phi2, K5.elem(2) + phi2, K5.one + phi2 * 2])
    miss5 = [c.key for c in non_represented_up_to(D5, None, 500)]
    same = D5 == exception_form(class_of(K5.one))
    K2 = make_field(2)
    betas = [c for c in enumerate_classes(K2, 50) if not oracles.decomposes(c.rep) and square_divisor(c.rep) is None]
    res = {str(b): [c.key for c in non_represented_up_to(exception_form(b), None, 500)] == [b.key] for b in betas}
    ok = miss5 == [(1, 0)] and same and betas and all(res.values())
    return ok, f"Q(sqrt5) form misses only [1] to 500 = {miss5 == [(1, 0)]}; Q(sqrt2) exception forms exact for {res}"


def ac7():
    K5, K2 = make_field(5), make_field(2)
    a = certify_critical(class_of(K5.elem(2)), "diag")
    b = certify_critical(class_of(K2.elem(2)), "diag")
    ok = (
        isinstance(a, CriticalWitness)
        and b.status == "rejected-not-squarefree"
        and b.square_witness == K2.elem(0, 1)
    )
    return ok, f"2 over Q(sqrt5): {a.status}; 2 over Q(sqrt2): {b.status} with witness {b.square_witness}"


def ac8():
    K5, K2 = make_field(5), make_field(2)
    r = check_dominated_integrality(K5.elem(3), "elements")
    first = not r.holds and r.witness == K5.elem(1, 1)
    second = check_dominated_integrality(K2.elem(2), "elements").holds
    third = all(check_factor_condition(make_field(D), 1, m).holds for D in (2, 3, 5, 7, 13) for m in ("auto", "inert", "exact"))
    agree = True
    for D in (2, 3, 5, 7, 13):
        K = make_field(D)
        for p in oracles.primes_upto(100):
            if p == 2:
                want = K.discriminant % 2 == 1 and K.discriminant % 8 in (3, 5)
            else:
                want = oracles.legendre(K.discriminant, p) == -1
            agree &= is_inert(K, p) == want
            agree &= check_factor_condition(K, p, "inert").holds == want
    ok = first and second and third and agree
    return ok, f"dominated(3) fails on Q(sqrt5) via (3+sqrt5)/2 = {first}; dominated(2) on Q(sqrt2) = {second}; m=1 = {third}; inert tier vs residues = {agree}"


def _random_form(K, rng):
    pool = list(oracles.elements_in_box(K, 6, 6))
    while True:
        n = rng.randint(1, 3)
        M = [[K.zero] * n for _ in range(n)]
        for i in range(n):
            M[i][i] = rng.choice(pool)
            for j in range(i):
                if rng.random() < 0.4:
                    M[i][j] = M[j][i] = K.elem(rng.randint(-2, 2), rng.randint(-1, 1))
        try:
            return gram_form(K, M)
        except FormError:
            continue


def _random_z(rng):
    while True:
        n = rng.randint(1, 3)
        M = [[0] * n for _ in range(n)]
        for i in range(n):
            M[i][i] = rng.randint(1, 7)
            for j in range(i):
                M[i][j] = M[j][i] = rng.randint(-4, 4)
        try:
            return z_form(M)
        except FormError:
            continue


def ac9():
    rng = random.Random(2024)
    sweep_ok = True
    for D in (2, 3, 5):
        K = make_field(D)
        classes = enumerate_classes(K, 50)
        for _ in range(20):
            f = _random_form(K, rng)
            swept = {c.key for c in represented_classes(f, 50)}
            per = {c.key for c in classes if find_representation(f, c.rep) is not None}
            sweep_ok &= swept == per
    cf_ok = all(
        indecomposable_classes(make_field(D), 10**4, "cf") == indecomposable_classes(make_field(D), 10**4, "scan")
        for D in (2, 3, 5, 6, 7, 10)
    )
    red_ok = True
    for _ in range(100):
        f = _random_z(rng)
        r = reduce_form(f)
        red_ok &= reduce_form(r) == r
        red_ok &= oracles.z_values(int_matrix(f), 60) == oracles.z_values(int_matrix(r), 60)
    ok = sweep_ok and cf_ok and red_ok
    return ok, f"sweep = per-target on 60 random forms to 50: {sweep_ok}; cf = scan to 1e4: {cf_ok}; reduce_form on 100 forms: {red_ok}"


def ac10():
    ok = True
    notes = []
    # escalation trails: alpha stays unrepresented at every step, trail norms >= N(alpha)
    cases = [(QQ, 15, [1, 2, 5, 5]), (QQ, 7, [1, 1, 1]), (make_field(5), None, [1])]
    for K, a, start in cases:
        alpha = class_of(K.elem(a)) if a else class_of(K.elem(2))
        w = escalate_witness(diag_form(K, start), alpha, ALL, 150)
        L = diag_form(K, start)
        step_ok = find_representation(L, alpha.rep) is None
        for c in w.escalation_trail:
            L = orthogonal_sum(L, diag_form(K, [c.rep]))
            step_ok &= find_representation(L, alpha.rep) is None and c.norm >= alpha.norm
        ok &= step_ok and isinstance(w, CriticalWitness)
    notes.append("trails ok" if ok else "trail violation")
    # candidate sets: squarefree, nested in X, sigma-closed, even when the unit is totally positive
    nested = True
    fields = [(QQ, 15), (make_field(2), 12), (make_field(3), 12), (make_field(5), 12), (make_field(6), 12), (make_field(7), 12)]
    for K, nb in fields:
        sets = {X: {c.key for c in criterion_candidates(K, X, nb).classes} for X in ("diag", "cl")}
        nested &= sets["diag"] <= sets["cl"]
        c = criterion_candidates(K, "diag", nb)
        ok &= all(square_divisor(x.rep) is None for x in c.classes)
        ok &= c.closure["sigma_closed"]
        if K.degree == 2 and K.unit_totally_positive:
            ok &= bool(c.closure["even"]) and bool(c.closure["unit_closed"])
    nc = {c.key for c in criterion_candidates(QQ, "nc", 15).classes}
    cl = {c.key for c in criterion_candidates(QQ, "cl", 15).classes}
    nested &= cl <= nc
    ok &= nested
    notes.append(f"diag <= cl <= nc: {nested}")
    return ok, "; ".join(notes) + "; squarefree, sigma-closed, even for N(e)=+1 on Q, Q(sqrt 2,3,5,6,7)"


def ac11():
    outs = []
    for w in ("1", "2", "8"):
        buf = io.StringIO()
        cli.dispatch(["criterion", "--field", "Qsqrt:2", "--norm-bound", "20", "--workers", w, "--no-cache"], stdout=buf)
        outs.append(buf.getvalue())
    for w in ("1", "8"):
        buf = io.StringIO()
        cli.dispatch(["criterion", "--field", "Q", "--norm-bound", "15", "--workers", w, "--no-cache"], stdout=buf)
        outs.append(buf.getvalue())
    ok = outs[0] == outs[1] == outs[2] and outs[3] == outs[4] and len(outs[0]) > 100
    return ok, "criterion JSON byte-identical for 1, 2 and 8 workers"


CHECKS = [ac1, ac2, ac3, ac4, ac5, ac6, ac7, ac8, ac9, ac10, ac11]


@pytest.mark.parametrize("n", range(1, 12))
def test_acceptance(n):
    ok, what = CHECKS[n - 1]()
    assert report(n, ok, what), what


if __name__ == "__main__":
    import os
    import tempfile

    os.environ.setdefault("CRITSET_CACHE", tempfile.mkdtemp())
    results = [report(i + 1, *f()) for i, f in enumerate(CHECKS)]
    sys.exit(0 if all(results) else 1)
