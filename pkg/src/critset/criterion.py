"""Truants, orthogonal escalation and bounded criticality certificates.

Every positive answer here is a certificate checked up to an explicit norm
bound; a failed search is reported as inconclusive, never as a disproof.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

from .elements import (
    SquareClass,
    class_of,
    conjugate_class,
    elements_dominated_by,
    elements_of_norm,
    enumerate_classes,
    indec_sequence,
    is_indecomposable,
    is_rational_class,
    square_divisor,
)
from .forms import (
    FormError,
    QForm,
    ValueSweep,
    diag_form,
    find_representation,
    non_represented_up_to,
    orthogonal_sum,
    zero_form,
)
from .ring import AlgInt, FieldCtx, FieldError, exact_quotient, is_unit, make_field

# diagonal Z-forms with truant n, one for each n in the diagonal criterion set over Q
T_TABLE: dict[int, tuple[int, ...]] = {
    1: (),
    2: (1,),
    3: (1, 1),
    5: (1, 2),
    6: (1, 1, 3),
    7: (1, 1, 1),
    10: (1, 2, 3),
    14: (1, 1, 2),
    15: (1, 2, 5, 5),
}

X_LEVELS = {"diag": 0, "cl": 1, "nc": 2}


class CriterionError(ValueError):
    pass


# ---------------------------------------------------------------------------
# subsets S of the square classes


@dataclass(frozen=True)
class SSpec:
    """A subset S of the square classes.

    ``base`` is "all", "list", "squarefree" or "rational"; ``members`` is
    used by "list" and ``excluded`` removes classes from any base.
    """

    base: str = "all"
    members: tuple[tuple[int, int], ...] = ()
    excluded: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.base not in ("all", "list", "squarefree", "rational"):
            raise CriterionError(f"unknown S variant {self.base!r}")

    def contains(self, c: SquareClass) -> bool:
        if c.key in self.excluded:
            return False
        if self.base == "all":
            return True
        if self.base == "list":
            return c.key in self.members
        if self.base == "squarefree":
            return square_divisor(c.rep) is None
        return is_rational_class(c)

    def minus(self, c: SquareClass) -> SSpec:
        return SSpec(self.base, self.members, tuple(sorted(set(self.excluded) | {c.key})))

    @property
    def tag(self) -> str:
        names = {"all": "ALL", "squarefree": "squarefree", "rational": "rational-integers"}
        t = names.get(self.base) or "list[" + ",".join(f"{a}:{b}" for a, b in self.members) + "]"
        if self.excluded:
            t += "-minus[" + ",".join(f"{a}:{b}" for a, b in self.excluded) + "]"
        return t

    def to_json(self) -> dict:
        d: dict = {"variant": self.base}
        if self.base == "list":
            d["members"] = [{"a": a, "b": b} for a, b in self.members]
        if self.excluded:
            d["excluded"] = [{"a": a, "b": b} for a, b in self.excluded]
        return d

    @classmethod
    def of_classes(cls, classes) -> SSpec:
        return cls("list", tuple(sorted(c.key for c in classes)))


ALL = SSpec()


# ---------------------------------------------------------------------------
# truants


@dataclass
class TruantReport:
    form: QForm
    S: SSpec
    searched_norm_bound: int
    truant_norm: int | None
    truants: list[SquareClass]

    @property
    def canonical_truant(self) -> SquareClass | None:
        return self.truants[0] if self.truants else None


def truants(form: QForm, S: SSpec = ALL, bound: int = 1000) -> TruantReport:
    """Minimal-norm classes of S (norm <= bound) that the form misses."""
    missing = non_represented_up_to(form, S, bound)
    if not missing:
        return TruantReport(form, S, bound, None, [])
    n = missing[0].norm
    return TruantReport(form, S, bound, n, [c for c in missing if c.norm == n])


def _has_truant(form: QForm, alpha: SquareClass, S: SSpec) -> bool:
    rep = truants(form, S, alpha.norm)
    return alpha in rep.truants


# ---------------------------------------------------------------------------
# escalation


@dataclass
class CriticalWitness:
    alpha: SquareClass
    X: str
    witness_form: QForm
    escalation_trail: list[SquareClass]
    verified_bound: int
    start: str = ""
    status: str = "certified-up-to-bound"


@dataclass
class EscalationFailure:
    alpha: SquareClass
    X: str
    status: str
    reason: str
    escalation_trail: list[SquareClass] = field(default_factory=list)
    square_witness: AlgInt | None = None
    attempts: list[str] = field(default_factory=list)


def escalate_witness(
    start: QForm,
    alpha: SquareClass,
    S: SSpec = ALL,
    verify_bound: int = 200,
    max_steps: int = 200,
    X: str | None = None,
) -> CriticalWitness | EscalationFailure:
    """Grow ``start`` by orthogonal truants of S minus alpha until nothing of
    norm <= verify_bound is missing.  alpha is re-checked at every step."""
    K = start.field
    if not S.contains(alpha):
        raise CriterionError(f"{alpha} is not in S")
    if not _has_truant(start, alpha, S):
        raise CriterionError(f"{alpha} is not a truant of the starting form")
    X = X or start.X
    rest = S.minus(alpha)
    sweep = ValueSweep(start, verify_bound)
    L = start
    trail: list[SquareClass] = []
    classes = [c for c in enumerate_classes(K, verify_bound) if rest.contains(c)]
    for _ in range(max_steps + 1):
        got = sweep.represented_keys()
        missing = [c for c in classes if c.key not in got]
        if not missing:
            return CriticalWitness(alpha, X, L, trail, verify_bound)
        if len(trail) == max_steps:
            break
        beta = missing[0]
        if beta.norm < alpha.norm:
            raise AssertionError(f"escalation chose {beta} of norm below {alpha}")
        sweep.extend(diag_form(K, [beta.rep]))
        L = sweep.form
        trail.append(beta)
        if find_representation(L, alpha.rep) is not None:
            raise AssertionError(f"{alpha} became represented after adding {beta}")
    return EscalationFailure(alpha, X, "inconclusive", f"max_steps={max_steps} exhausted", trail)


# ---------------------------------------------------------------------------
# starting forms


def _smaller(K: FieldCtx, alpha: SquareClass, pred: Callable[[SquareClass], bool] | None = None) -> list[SquareClass]:
    return [c for c in enumerate_classes(K, alpha.norm - 1) if pred is None or pred(c)]


def _diag(K: FieldCtx, reps: list[AlgInt]) -> QForm:
    return diag_form(K, reps) if reps else zero_form(K)


def _is_sqfree(c: SquareClass) -> bool:
    return square_divisor(c.rep) is None


def _recipe_starts(alpha: SquareClass):
    K = alpha.rep.K
    one = class_of(K.one)
    two = class_of(K.elem(2))
    yield "smaller-classes", _diag(K, [c.rep for c in _smaller(K, alpha)])
    sq = _smaller(K, alpha, _is_sqfree)
    yield "smaller-squarefree", _diag(K, [c.rep for c in sq])
    rest = [c.rep for c in sq if c != one and c != two]
    yield "ones-prefix", _diag(K, [K.one, K.one] + rest)
    if is_rational_class(alpha):
        n = math.isqrt(alpha.norm) if K.degree == 2 else alpha.norm
        if n in T_TABLE:
            d = [c.rep for c in sq if not is_rational_class(c)]
            yield "rational-lift", _diag(K, d + [K.elem(a) for a in T_TABLE[n]])


def _escalation_search(alpha: SquareClass, S: SSpec, budget: int):
    """Diagonal escalation tree below N(alpha), pruned at forms representing
    alpha.  A child adds <c> for some c with c*x^2 <= t totally and
    t - c*x^2 already represented, t being the canonical truant."""
    K = alpha.rep.K
    seen = set()
    stack = [()]
    steps = 0
    while stack and steps < budget:
        coeffs = stack.pop()
        steps += 1
        L = _diag(K, list(coeffs))
        rep = truants(L, S, alpha.norm)
        if alpha in rep.truants:
            yield f"escalation-search:{len(coeffs)}", L
            continue
        if rep.truant_norm is None or rep.truant_norm >= alpha.norm:
            continue
        t = rep.canonical_truant.rep
        kids = []
        for y in elements_dominated_by(t):
            r = t - y
            if r and find_representation(L, r) is None:
                continue
            for c in _square_quotients(y):
                key = tuple(sorted(coeffs + (c.rep,), key=lambda e: (e.norm(), e.trace(), e.a, e.b)))
                if key in seen:
                    continue
                seen.add(key)
                child = _diag(K, list(key))
                if find_representation(child, alpha.rep) is None:
                    kids.append(key)
        stack.extend(reversed(kids))


def _square_quotients(y: AlgInt) -> list[SquareClass]:
    """Classes of y / w^2 for every w with w^2 | y."""
    K = y.K
    out = {class_of(y)}
    N = abs(y.norm())
    n = 2
    while n * n <= N:
        if N % (n * n) == 0:
            for w in elements_of_norm(K, n):
                q = exact_quotient(w * w, y)
                if q is not None:
                    out.add(class_of(q))
        n += 1
    return sorted(out, key=lambda c: c.sort_key)


def _ztree_starts(alpha: SquareClass, X: str, max_rank: int):
    from .ztree import build_tree, iter_nodes

    n = alpha.norm
    levels = ["diag", "cl", "nc"][: X_LEVELS[X] + 1]
    for lev in levels:
        # rank-4 non-classical trees are too large to build per candidate
        rank = min(max_rank, 3) if lev == "nc" else max_rank
        root, _ = build_tree(lev, rank, probe_bound=max(4 * n, 50), stop_above=n)
        for node in iter_nodes(root):
            if node.truant == n:
                yield f"ztree-{lev}:{node.depth}", node.form


def certify_critical(
    alpha: SquareClass,
    X: str = "diag",
    verify_bound: int | None = None,
    S: SSpec = ALL,
    max_steps: int = 200,
    search_budget: int = 400,
    ztree_rank: int = 4,
) -> CriticalWitness | EscalationFailure:
    if X not in X_LEVELS:
        raise CriterionError(f"unknown X {X!r}")
    if not S.contains(alpha):
        raise CriterionError(f"{alpha} is not in S")
    K = alpha.rep.K
    vb = verify_bound or 4 * alpha.norm
    w = square_divisor(alpha.rep)
    if w is not None:
        return EscalationFailure(
            alpha, X, "rejected-not-squarefree",
            f"{alpha.rep} is divisible by the square of the non-unit {w}", square_witness=w,
        )
    attempts = []
    starts = list(_recipe_starts(alpha))
    gens = [iter(starts), _escalation_search(alpha, S, search_budget)]
    if K.degree == 1:
        gens.append(_ztree_starts(alpha, X, ztree_rank))
    tried = set()
    for g in gens:
        for label, L in g:
            if L.M in tried:
                continue
            tried.add(L.M)
            if X_LEVELS[L.X] > X_LEVELS[X]:
                continue
            attempts.append(label)
            if not _has_truant(L, alpha, S):
                continue
            res = escalate_witness(L, alpha, S, vb, max_steps, X)
            if isinstance(res, CriticalWitness):
                res.start = label
                return res
    if K.degree == 2 and is_rational_class(alpha):
        # without rational dominated elements the criticality over Q does not transfer
        n = math.isqrt(alpha.norm)
        hyp = check_dominated_integrality(K.elem(n), "elements")
        if not hyp.holds:
            return EscalationFailure(
                alpha, X, "undetermined",
                f"no witness found and {hyp.witness} <= {n} is not rational, so criticality over Q does not transfer",
                attempts=attempts,
            )
    return EscalationFailure(alpha, X, "no-witness-found", "no starting form with this truant was found", attempts=attempts)


# ---------------------------------------------------------------------------
# criterion candidates


@dataclass
class CriterionCandidate:
    field: FieldCtx
    X: str
    norm_bound: int
    verify_bound: int
    witnesses: list[CriticalWitness]
    failures: list[EscalationFailure]
    S: SSpec = ALL
    closure: dict = field(default_factory=dict)

    @property
    def classes(self) -> list[SquareClass]:
        return [w.alpha for w in self.witnesses]


def _certify_job(args):
    desc, key, X, vb, S, max_steps = args
    K = make_field(desc)
    c = class_of(K.elem(*key))
    return certify_critical(c, X, vb, S, max_steps)


def criterion_candidates(
    K: FieldCtx,
    X: str = "diag",
    norm_bound: int = 15,
    verify_bound: int | None = None,
    S: SSpec = ALL,
    workers: int = 1,
    max_steps: int = 200,
) -> CriterionCandidate:
    """All classes of norm <= norm_bound with a witness verified to verify_bound."""
    vb = verify_bound or 4 * norm_bound
    if vb < norm_bound:
        raise CriterionError("verify_bound must be at least norm_bound")
    todo = [c for c in enumerate_classes(K, norm_bound) if S.contains(c) and _is_sqfree(c)]
    jobs = [(K.descriptor, c.key, X, vb, S, max_steps) for c in todo]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_certify_job, jobs))
    else:
        results = [certify_critical(c, X, vb, S, max_steps) for c in todo]
    wit = [r for r in results if isinstance(r, CriticalWitness)]
    fail = [r for r in results if not isinstance(r, CriticalWitness)]
    cand = CriterionCandidate(K, X, norm_bound, vb, wit, fail, S)
    for w in wit:
        assert square_divisor(w.alpha.rep) is None
    cand.closure = closure_parity_check(cand)
    return cand


def closure_parity_check(candidate: CriterionCandidate) -> dict:
    K = candidate.field
    keys = {c.key for c in candidate.classes}
    report: dict = {"sigma_closed": True, "unit_closed": None, "even": None, "pairs": [], "violations": []}
    if K.degree == 1:
        return report
    for c in candidate.classes:
        s = conjugate_class(c)
        if s.key not in keys:
            report["sigma_closed"] = False
            report["violations"].append(f"conjugate of {c} missing")
    if K.unit_totally_positive:
        report["unit_closed"] = True
        pairs = set()
        for c in candidate.classes:
            e = class_of(c.rep * K.fund_unit)
            if e.key not in keys:
                report["unit_closed"] = False
                report["violations"].append(f"fundamental-unit multiple of {c} missing")
            pairs.add(tuple(sorted([c.key, e.key])))
        report["pairs"] = sorted(pairs)
        report["even"] = len(keys) % 2 == 0
        if not report["even"]:
            report["violations"].append("odd number of classes")
    return report


def diag_universal_from_candidates(candidate: CriterionCandidate, verify_bound: int) -> tuple[QForm, dict]:
    if not candidate.classes:
        raise CriterionError("empty candidate set")
    K = candidate.field
    f = diag_form(K, [c.rep for c in candidate.classes])
    missed = non_represented_up_to(f, candidate.S, verify_bound)
    return f, {
        "rank": f.rank,
        "verified_bound": verify_bound,
        "universal_up_to_bound": not missed,
        "missed": missed,
    }


# ---------------------------------------------------------------------------
# explicit exception forms


def _I4(c: AlgInt) -> list[AlgInt]:
    return [c] * 4


def _J(c: AlgInt) -> list[AlgInt]:
    return [c * 2, c * 2, c * 3, c * 4]


def exception_form(beta: SquareClass) -> QForm:
    """Diagonal form missing exactly the class of a squarefree indecomposable
    beta, built from the ordered indecomposables of the field."""
    K = beta.rep.K
    if K.degree != 2:
        raise CriterionError("exception forms need a real quadratic field")
    if not is_indecomposable(beta.rep):
        raise CriterionError(f"{beta.rep} is decomposable")
    if square_divisor(beta.rep) is not None:
        raise CriterionError(f"{beta.rep} is not squarefree")
    seq = indec_sequence(K)
    t = seq.t
    if t == 1:
        # only indecomposable is 1 (golden ratio field)
        p2 = K.fund_unit ** 2
        coeffs = _J(K.one) + _J(K.one) + [K.one + p2, K.elem(2) + p2, K.one + p2 * 2]
        return diag_form(K, coeffs)
    k = seq.index_of(beta.rep)
    if k is None:
        raise CriterionError(f"{beta.rep} is not in the indecomposable sequence")
    coeffs: list[AlgInt] = []
    for i in range(t):
        if i != k:
            coeffs += _I4(seq.beta(i))
    bk = seq.beta(k)
    coeffs += _J(bk)
    coeffs += [seq.beta(k - 1) + bk, bk + seq.beta(k + 1)]
    return diag_form(K, coeffs)


# ---------------------------------------------------------------------------
# hypotheses for transferring rational critical elements


@dataclass
class HypothesisResult:
    holds: bool
    witness: AlgInt | None = None
    tier: str = ""
    detail: str = ""


def check_dominated_integrality(n: AlgInt, mode: str = "elements") -> HypothesisResult:
    """Whether every alpha <= n (or every beta with beta^2 <= n) is rational."""
    K = n.K
    if not n.is_totally_positive():
        raise FieldError(f"{n} is not totally positive")
    if mode == "elements":
        bad = [a for a in elements_dominated_by(n) if not a.is_rational()]
    elif mode == "squares":
        bad = [b for b in _square_roots_dominated(n) if not b.is_rational()]
    else:
        raise CriterionError(f"unknown mode {mode!r}")
    if not bad:
        return HypothesisResult(True, tier=mode)
    bad.sort(key=lambda x: x.approx()[0], reverse=True)
    return HypothesisResult(False, bad[0], mode)


def _square_roots_dominated(n: AlgInt) -> list[AlgInt]:
    from .elements import box_coords
    from .ring import totally_leq

    K = n.K
    if K.degree == 1:
        return [K.elem(b) for b in range(1, math.isqrt(n.a) + 1)]
    s1, s2 = n.approx()
    r1, r2 = math.sqrt(s1), math.sqrt(s2)
    out = []
    for a, b in box_coords(K, -r1, r1, -r2, r2):
        x = AlgInt(a, b, K)
        if x and totally_leq(x * x, n):
            out.append(x)
    return out


def kronecker(d: int, p: int) -> int:
    """Kronecker symbol (d/p) for a prime p."""
    if p == 2:
        if d % 2 == 0:
            return 0
        return 1 if d % 8 in (1, 7) else -1
    r = pow(d % p, (p - 1) // 2, p)
    if r == 0:
        return 0
    return 1 if r == 1 else -1


def _prime_factors(m: int) -> list[int]:
    ps, p = [], 2
    while p * p <= m:
        if m % p == 0:
            ps.append(p)
            while m % p == 0:
                m //= p
        p += 1
    if m > 1:
        ps.append(m)
    return ps


def is_inert(K: FieldCtx, p: int) -> bool:
    return K.degree == 2 and kronecker(K.discriminant, p) == -1


def check_factor_condition(K: FieldCtx, m: int, mode: str = "auto") -> HypothesisResult:
    """If m = alpha*w^2 then some unit multiple of w is rational."""
    if m < 1:
        raise CriterionError("m must be positive")
    if m == 1 or K.degree == 1:
        return HypothesisResult(True, tier="trivial")
    if mode in ("auto", "inert") and all(is_inert(K, p) for p in _prime_factors(m)):
        return HypothesisResult(True, tier="inert")
    if mode == "inert":
        return HypothesisResult(False, tier="inert", detail="some prime factor is not inert")
    M = K.elem(m)
    for n in range(2, m + 1):
        if m % n:
            continue
        for w in elements_of_norm(K, n):
            if exact_quotient(w * w, M) is None:
                continue
            if not _rational_up_to_unit(w):
                return HypothesisResult(False, w, "exact", f"{m} = ({exact_quotient(w * w, M)})*({w})^2")
    return HypothesisResult(True, tier="exact")


def _rational_up_to_unit(w: AlgInt) -> bool:
    N = abs(w.norm())
    c = math.isqrt(N)
    if c * c != N:
        return False
    q = exact_quotient(w.K.elem(c), w)
    return q is not None and is_unit(q)
