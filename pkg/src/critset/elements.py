"""Totally positive integers modulo squares of units.

Canonical class representatives are chosen so that the ratio of the two
embeddings lies in ``[1, e^4)`` where ``e`` is the fundamental unit; over Q
the class of ``n`` is ``n`` itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cmp_to_key, lru_cache
from typing import Callable, Iterable, Iterator

from .ring import (
    AlgInt,
    FieldCtx,
    FieldError,
    compare_at,
    conjugate,
    continued_fraction_omega,
    embedding_sign,
    exact_quotient,
    is_tp_coords,
    is_totally_positive,
    mul_coords,
    norm_coords,
    unit_inverse,
)

_PAD = 1e-9


@dataclass(frozen=True)
class SquareClass:
    rep: AlgInt
    norm: int

    @property
    def key(self) -> tuple[int, int]:
        return (self.rep.a, self.rep.b)

    @property
    def sort_key(self) -> tuple[int, int, int, int]:
        return (self.norm, self.rep.trace(), self.rep.a, self.rep.b)

    def __lt__(self, other: SquareClass) -> bool:
        return self.sort_key < other.sort_key

    def __str__(self) -> str:
        return f"[{self.rep}]"


# ---------------------------------------------------------------------------
# unit powers and canonical representatives


@lru_cache(maxsize=None)
def _unit_powers(K: FieldCtx) -> tuple[AlgInt, AlgInt, AlgInt]:
    e = K.fund_unit
    e2 = e * e
    return e2, unit_inverse(e2), e2 * e2


def unit_square(K: FieldCtx) -> AlgInt:
    return _unit_powers(K)[0]


def _ratio_below_e4(x: AlgInt, e4: AlgInt) -> bool:
    # sigma_1(x) < e^4 sigma_2(x)  <=>  sigma_1(e^4 * conj(x) - x) > 0
    y = e4 * conjugate(x) - x
    return embedding_sign(y.K, y.a, y.b, 0) > 0


def is_canonical_coords(K: FieldCtx, a: int, b: int) -> bool:
    if K.D is None:
        return a > 0
    if b < 0:
        return False
    e4 = _unit_powers(K)[2]
    c = (a + b * K.trace_omega, -b)
    y0, y1 = mul_coords(K, (e4.a, e4.b), c)
    return embedding_sign(K, y0 - a, y1 - b, 0) > 0


def class_of(x: AlgInt) -> SquareClass:
    if not is_totally_positive(x):
        raise FieldError(f"{x} is not totally positive")
    K = x.K
    if K.D is None:
        return SquareClass(x, x.a)
    e2, e2inv, e4 = _unit_powers(K)
    s1, s2 = x.approx()
    big = max(s1, s2)
    if big > 0:
        # jump close to the window, then settle exactly; the larger
        # embedding carries no cancellation error
        log_ratio = 2 * math.log(big) - math.log(x.norm())
        if s2 > s1:
            log_ratio = -log_ratio
        k = math.floor(log_ratio / (2 * math.log(e2.approx()[0])))
        if abs(k) > 2:
            x = x * (e2inv ** k if k > 0 else e2 ** (-k))
    while x.b < 0:
        x = x * e2
    while not _ratio_below_e4(x, e4):
        x = x * e2inv
    return SquareClass(x, x.norm())


def same_class(x: AlgInt, y: AlgInt) -> bool:
    return class_of(x) == class_of(y)


# ---------------------------------------------------------------------------
# box scans


def box_coords(K: FieldCtx, lo1: float, hi1: float, lo2: float, hi2: float) -> Iterator[tuple[int, int]]:
    """Coordinates whose embeddings (approximately) lie in [lo1,hi1] x [lo2,hi2].

    The range is widened outward; callers filter exactly.
    """
    if K.D is None:
        for a in range(math.ceil(lo1 - _PAD) - 1, math.floor(hi1 + _PAD) + 2):
            yield (a, 0)
        return
    w1, w2 = K.w1, K.w2
    sd = w1 - w2
    bmin = math.floor((lo1 - hi2) / sd) - 1
    bmax = math.ceil((hi1 - lo2) / sd) + 1
    for b in range(bmin, bmax + 1):
        alo = max(lo1 - b * w1, lo2 - b * w2)
        ahi = min(hi1 - b * w1, hi2 - b * w2)
        if alo > ahi + 2:
            continue
        for a in range(math.floor(alo) - 1, math.ceil(ahi) + 2):
            yield (a, b)


def _class_box(K: FieldCtx, bound: int) -> tuple[float, float]:
    r = math.sqrt(bound)
    if K.D is None:
        return (float(bound), 0.0)
    e2 = unit_square(K).approx()[0]
    return (e2 * r * (1 + _PAD) + _PAD, r * (1 + _PAD) + _PAD)


@lru_cache(maxsize=64)
def _classes_upto(K: FieldCtx, bound: int) -> tuple[SquareClass, ...]:
    if K.D is None:
        return tuple(SquareClass(K.elem(n), n) for n in range(1, bound + 1))
    X, Y = _class_box(K, bound)
    out = []
    for a, b in box_coords(K, 0.0, X, 0.0, Y):
        if b < 0 or not is_tp_coords(K, a, b):
            continue
        n = norm_coords(K, a, b)
        if n > bound or not is_canonical_coords(K, a, b):
            continue
        out.append(SquareClass(AlgInt(a, b, K), n))
    out.sort(key=lambda c: c.sort_key)
    return tuple(out)


def enumerate_classes(K: FieldCtx, bound: int, filter: Callable[[SquareClass], bool] | None = None) -> list[SquareClass]:
    """All square classes of norm <= bound, canonically sorted."""
    if bound < 1:
        return []
    classes = _classes_upto(K, int(bound))
    if filter is None:
        return list(classes)
    return [c for c in classes if filter(c)]


def elements_dominated_by(x: AlgInt) -> list[AlgInt]:
    """All totally positive alpha with alpha ⪯ x."""
    if not is_totally_positive(x):
        raise FieldError(f"{x} is not totally positive")
    K = x.K
    if K.D is None:
        return [K.elem(n) for n in range(1, x.a + 1)]
    s1, s2 = x.approx()
    out = []
    for a, b in box_coords(K, 0.0, s1, 0.0, s2):
        if not is_tp_coords(K, a, b):
            continue
        if (a, b) != (x.a, x.b) and not is_tp_coords(K, x.a - a, x.b - b):
            continue
        out.append(AlgInt(a, b, K))
    out.sort(key=lambda y: (y.trace(), y.a, y.b))
    return out


# ---------------------------------------------------------------------------
# norms, squarefreeness


def elements_of_norm(K: FieldCtx, n: int) -> list[AlgInt]:
    """Elements with |N| = n, one or more per associate class (none missed)."""
    if n < 1:
        raise ValueError("n must be positive")
    if K.D is None:
        return [K.elem(n)]
    e = K.fund_unit.approx()[0]
    r = math.sqrt(n)
    # associates can be moved to sigma_1 in [sqrt(n), e*sqrt(n)]
    lo1, hi1 = r * (1 - _PAD) - _PAD, e * r * (1 + _PAD) + _PAD
    out = []
    seen = set()
    for a, b in box_coords(K, lo1, hi1, -r - 1, r + 1):
        if abs(norm_coords(K, a, b)) != n or embedding_sign(K, a, b, 0) <= 0:
            continue
        if (a, b) not in seen:
            seen.add((a, b))
            out.append(AlgInt(a, b, K))
    out.sort(key=lambda y: (abs(y.b), y.a, y.b))
    return out


def _divisors(n: int) -> list[int]:
    small, large = [], []
    d = 1
    while d * d <= n:
        if n % d == 0:
            small.append(d)
            if d * d != n:
                large.append(n // d)
        d += 1
    return small + large[::-1]


def square_divisor(x: AlgInt) -> AlgInt | None:
    """A non-unit w with w^2 | x, or None when x is squarefree."""
    K = x.K
    if K.D is None:
        n = 2
        while n * n <= x.a:
            if x.a % (n * n) == 0:
                return K.elem(n)
            n += 1
        return None
    N = abs(x.norm())
    for n in _divisors(N):
        if n == 1 or N % (n * n):
            continue
        for w in elements_of_norm(K, n):
            if exact_quotient(w * w, x) is not None:
                return w
    return None


def is_squarefree(x: AlgInt) -> bool:
    if not is_totally_positive(x):
        raise FieldError(f"{x} is not totally positive")
    return square_divisor(x) is None


# ---------------------------------------------------------------------------
# indecomposables


def decomposition(x: AlgInt) -> tuple[AlgInt, AlgInt] | None:
    """Some (beta, x - beta) with both totally positive, or None."""
    if not is_totally_positive(x):
        raise FieldError(f"{x} is not totally positive")
    K = x.K
    if K.D is None:
        return (K.one, x - 1) if x.a > 1 else None
    if is_tp_coords(K, x.a - 1, x.b):
        return (K.one, x - 1)
    s1, s2 = x.approx()
    for a, b in box_coords(K, 0.0, s1, 0.0, s2):
        if (a, b) == (x.a, x.b) or not is_tp_coords(K, a, b):
            continue
        if is_tp_coords(K, x.a - a, x.b - b):
            return (AlgInt(a, b, K), AlgInt(x.a - a, x.b - b, K))
    return None


def is_indecomposable(x: AlgInt) -> bool:
    return decomposition(x) is None


def _by_dominant(x: AlgInt, y: AlgInt) -> int:
    return compare_at(x, y, 0)


@dataclass
class IndecSequence:
    """Indecomposables ordered by the dominant embedding, beta_0 = 1.

    ``period`` holds beta_0 .. beta_{t-1}; ``beta(i)`` translates by
    powers of e^2 for any integer index.
    """

    field: FieldCtx
    period: list[AlgInt]
    window: range = field(default_factory=lambda: range(0, 0))

    @property
    def t(self) -> int:
        return len(self.period)

    @property
    def unit_totally_positive(self) -> bool:
        return self.field.unit_totally_positive

    def beta(self, i: int) -> AlgInt:
        n, k = divmod(i, self.t)
        e2 = unit_square(self.field)
        return self.period[k] * (e2 ** n if n >= 0 else unit_inverse(e2) ** (-n))

    @property
    def betas(self) -> list[AlgInt]:
        return [self.beta(i) for i in self.window]

    def index_of(self, x: AlgInt) -> int | None:
        """Index k in [0, t) with x in beta_k * U^2, if x is indecomposable."""
        c = class_of(x)
        for k, b in enumerate(self.period):
            if class_of(b) == c:
                return k
        return None


@lru_cache(maxsize=None)
def _indec_period_scan(K: FieldCtx) -> tuple[AlgInt, ...]:
    # indecomposable beta with sigma_1 >= 1 and beta != 1 must have
    # sigma_2 <= 1 (otherwise beta = 1 + (beta - 1)); scan [1, e^2) x (0, 1]
    e2 = unit_square(K)
    hi1 = e2.approx()[0]
    found = []
    for a, b in box_coords(K, 1.0, hi1, 0.0, 1.0):
        if not is_tp_coords(K, a, b):
            continue
        x = AlgInt(a, b, K)
        if compare_at(x, K.one, 0) < 0 or compare_at(x, e2, 0) >= 0:
            continue
        if is_indecomposable(x):
            found.append(x)
    found.sort(key=cmp_to_key(_by_dominant))
    assert found and found[0] == K.one
    return tuple(found)


def _convergent_elements(K: FieldCtx, count: int) -> tuple[list[int], list[AlgInt]]:
    quotients, start = continued_fraction_omega(K)
    period = quotients[start:]

    def u(i: int) -> int:
        return quotients[i] if i < len(quotients) else period[(i - start) % len(period)]

    t = K.trace_omega
    alphas = [K.one]  # alpha_{-1}
    p_prev, p, q_prev, q = 0, 1, 1, 0
    for i in range(count):
        p_prev, p = p, u(i) * p + p_prev
        q_prev, q = q, u(i) * q + q_prev
        alphas.append(AlgInt(p - q * t, q, K))
    return [u(i) for i in range(count + 1)], alphas


@lru_cache(maxsize=None)
def indecomposables_cf(K: FieldCtx) -> tuple[AlgInt, ...]:
    """Indecomposables up to unit squares from convergents and semiconvergents.

    alpha_{i,r} = alpha_i + r alpha_{i+1} for odd i >= -1, 0 <= r <= u_{i+2},
    and their conjugates.  Cross-checked against the definitional scan in
    the tests.
    """
    if K.D is None:
        return (K.one,)
    quotients, start = continued_fraction_omega(K)
    s = len(quotients) - start
    count = 2 * (len(quotients) + 2 * s) + 4
    us, alphas = _convergent_elements(K, count)
    # alphas[j] is alpha_{j-1}
    found = {}
    for i in range(-1, count - 2, 2):
        ai, ai1 = alphas[i + 1], alphas[i + 2]
        for r in range(0, us[i + 2] + 1):
            x = ai + ai1 * r
            for y in (x, conjugate(x)):
                if is_totally_positive(y):
                    c = class_of(y)
                    found[c.key] = c.rep
    return tuple(sorted(found.values(), key=lambda y: (y.norm(), y.trace(), y.a, y.b)))


def indec_sequence(K: FieldCtx, window: range | None = None) -> IndecSequence:
    if K.degree != 2:
        raise FieldError("the indecomposable sequence needs a real quadratic field")
    period = list(_indec_period_scan(K))
    if window is None:
        window = range(-len(period), 2 * len(period) + 1)
    return IndecSequence(K, period, window)


def indecomposable_classes(K: FieldCtx, bound: int, method: str = "scan") -> list[SquareClass]:
    """Indecomposable classes of norm <= bound."""
    if method == "scan":
        return [c for c in enumerate_classes(K, bound) if is_indecomposable(c.rep)]
    if method == "cf":
        reps = indecomposables_cf(K)
        out = [class_of(x) for x in reps if x.norm() <= bound]
        return sorted(set(out), key=lambda c: c.sort_key)
    raise ValueError(f"unknown method {method!r}")


def squarefree_indecomposable_classes(K: FieldCtx, bound: int) -> list[SquareClass]:
    if K.D is None:
        return [c for c in enumerate_classes(K, min(bound, 1))]
    cands = {class_of(x) for x in _indec_period_scan(K)}
    cands |= {class_of(conjugate(x)) for x in _indec_period_scan(K)}
    out = [c for c in cands if c.norm <= bound and square_divisor(c.rep) is None]
    return sorted(out, key=lambda c: c.sort_key)


def conjugate_class(c: SquareClass) -> SquareClass:
    return class_of(conjugate(c.rep))


def is_rational_class(c: SquareClass) -> bool:
    """Whether the class contains a positive rational integer."""
    K = c.rep.K
    if K.D is None:
        return True
    n = math.isqrt(c.norm)
    return n * n == c.norm and class_of(K.elem(n)) == c
