"""Exact arithmetic in the ring of integers of Q or a real quadratic field.

Elements are stored as ``a + b*w`` in the integral basis ``{1, w}`` where
``w = sqrt(D)`` for ``D = 2, 3 (mod 4)`` and ``w = (1 + sqrt(D))/2`` for
``D = 1 (mod 4)``.  The dominant embedding sends ``sqrt(D)`` to the positive
root.  Every predicate is decided with integer arithmetic; floats are only
ever used to propose search ranges that are re-checked exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache


class FieldError(ValueError):
    pass


def _squarefree_factor(n: int) -> int | None:
    """Return some d > 1 with d*d | n, or None."""
    d = 2
    while d * d <= n:
        if n % (d * d) == 0:
            return d
        d += 1
    return None


def _sign_pq(p: int, q: int, d: int) -> int:
    """Sign of p + q*sqrt(d) for non-square d > 0."""
    if q == 0:
        return (p > 0) - (p < 0)
    if p >= 0 and q >= 0:
        return 1
    if p <= 0 and q <= 0:
        return -1
    s = p * p - q * q * d
    # s != 0 since d is not a square
    if p > 0:
        return 1 if s > 0 else -1
    return 1 if s < 0 else -1


@dataclass(frozen=True, eq=False)
class FieldCtx:
    """Base field descriptor: Q (``D is None``) or Q(sqrt(D))."""

    D: int | None
    omega_mode: str  # "rational", "sqrtD" or "half"
    discriminant: int
    trace_omega: int
    norm_omega: int
    _unit: tuple[int, int]
    fund_unit_norm: int

    @property
    def kind(self) -> str:
        return "rational" if self.D is None else "real-quadratic"

    @property
    def degree(self) -> int:
        return 1 if self.D is None else 2

    @property
    def fund_unit(self) -> AlgInt:
        return AlgInt(self._unit[0], self._unit[1], self)

    @property
    def one(self) -> AlgInt:
        return AlgInt(1, 0, self)

    @property
    def zero(self) -> AlgInt:
        return AlgInt(0, 0, self)

    @property
    def omega(self) -> AlgInt:
        if self.D is None:
            raise FieldError("Q has no generator w")
        return AlgInt(0, 1, self)

    @property
    def unit_totally_positive(self) -> bool:
        return self.fund_unit_norm == 1 and self.D is not None

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FieldCtx) and self.D == other.D

    def __hash__(self) -> int:
        return hash(("FieldCtx", self.D))

    def __repr__(self) -> str:
        return "Q" if self.D is None else f"Q(sqrt({self.D}))"

    def __reduce__(self):
        return (make_field, (self.descriptor,))

    @property
    def descriptor(self) -> str:
        return "Q" if self.D is None else f"Qsqrt:{self.D}"

    # Float views of w at the two embeddings.  Used only to propose ranges.
    @property
    def w1(self) -> float:
        if self.D is None:
            return 0.0
        r = math.sqrt(self.D)
        return r if self.omega_mode == "sqrtD" else (1 + r) / 2

    @property
    def w2(self) -> float:
        if self.D is None:
            return 0.0
        r = math.sqrt(self.D)
        return -r if self.omega_mode == "sqrtD" else (1 - r) / 2

    def elem(self, a: int, b: int = 0) -> AlgInt:
        if self.D is None and b != 0:
            raise FieldError("rational elements have b = 0")
        return AlgInt(int(a), int(b), self)


@dataclass(frozen=True, slots=True)
class AlgInt:
    a: int
    b: int
    K: FieldCtx

    # -- arithmetic -------------------------------------------------------
    def _coerce(self, other) -> AlgInt:
        if isinstance(other, AlgInt):
            if other.K != self.K:
                raise FieldError(f"field mismatch: {self.K} vs {other.K}")
            return other
        if isinstance(other, int):
            return AlgInt(other, 0, self.K)
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return AlgInt(self.a + o.a, self.b + o.b, self.K)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return AlgInt(self.a - o.a, self.b - o.b, self.K)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return o - self

    def __neg__(self):
        return AlgInt(-self.a, -self.b, self.K)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        a, b = mul_coords(self.K, (self.a, self.b), (o.a, o.b))
        return AlgInt(a, b, self.K)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            if abs(self.norm()) != 1:
                raise FieldError("negative power of a non-unit")
            return unit_inverse(self) ** (-k)
        result = self.K.one
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other) -> bool:
        if isinstance(other, int):
            return self.b == 0 and self.a == other
        if isinstance(other, AlgInt):
            return self.a == other.a and self.b == other.b and self.K == other.K
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self.a, self.b, self.K.D))

    def __reduce__(self):
        return (AlgInt, (self.a, self.b, self.K))

    def __bool__(self) -> bool:
        return self.a != 0 or self.b != 0

    # -- structure --------------------------------------------------------
    @property
    def coords(self) -> tuple[int, int]:
        return (self.a, self.b)

    def norm(self) -> int:
        return norm_trace(self)[0]

    def trace(self) -> int:
        return norm_trace(self)[1]

    def conjugate(self) -> AlgInt:
        return conjugate(self)

    def is_totally_positive(self) -> bool:
        return is_totally_positive(self)

    def is_rational(self) -> bool:
        return self.b == 0

    def embedding_sign(self, i: int) -> int:
        return embedding_sign(self.K, self.a, self.b, i)

    def approx(self) -> tuple[float, float]:
        """Float values at the two embeddings (proposal only)."""
        K = self.K
        return (self.a + self.b * K.w1, self.a + self.b * K.w2)

    def __repr__(self) -> str:
        return f"AlgInt({self.a}, {self.b}, {self.K!r})"

    def __str__(self) -> str:
        K = self.K
        if K.D is None or self.b == 0:
            return str(self.a)
        if K.omega_mode == "sqrtD":
            p, q, den = self.a, self.b, 1
        else:
            p, q, den = 2 * self.a + self.b, self.b, 2
            if p % 2 == 0 and q % 2 == 0:
                p, q, den = p // 2, q // 2, 1
        if p == 0:
            s = f"{'-' if q < 0 else ''}{abs(q) if abs(q) != 1 else ''}√{K.D}"
        else:
            qs = "" if abs(q) == 1 else str(abs(q))
            s = f"{p}{'-' if q < 0 else '+'}{qs}√{K.D}"
        if den == 2:
            s = f"({s})/2"
        return s


def mul_coords(K: FieldCtx, x: tuple[int, int], y: tuple[int, int]) -> tuple[int, int]:
    a1, b1 = x
    a2, b2 = y
    bb = b1 * b2
    return (a1 * a2 - K.norm_omega * bb, a1 * b2 + a2 * b1 + K.trace_omega * bb)


def _pq(K: FieldCtx, a: int, b: int, i: int) -> tuple[int, int]:
    """Write sigma_i(a + b*w) as (p + q*sqrt(D)) / den, returning (p, q)."""
    if K.omega_mode == "sqrtD":
        return (a, b if i == 0 else -b)
    return (2 * a + b, b if i == 0 else -b)


def embedding_sign(K: FieldCtx, a: int, b: int, i: int) -> int:
    if K.D is None:
        return (a > 0) - (a < 0)
    p, q = _pq(K, a, b, i)
    return _sign_pq(p, q, K.D)


def is_tp_coords(K: FieldCtx, a: int, b: int) -> bool:
    if K.D is None:
        return a > 0
    return embedding_sign(K, a, b, 0) > 0 and embedding_sign(K, a, b, 1) > 0


def is_totally_positive(x: AlgInt) -> bool:
    return is_tp_coords(x.K, x.a, x.b)


def totally_leq(x: AlgInt, y: AlgInt) -> bool:
    """x ⪯ y: x = y, or y - x is totally positive."""
    d = y - x
    return not d or is_totally_positive(d)


def norm_trace(x: AlgInt) -> tuple[int, int]:
    K = x.K
    if K.D is None:
        return (x.a, x.a)
    a, b = x.a, x.b
    t, n = K.trace_omega, K.norm_omega
    return (a * a + a * b * t + b * b * n, 2 * a + b * t)


def norm_coords(K: FieldCtx, a: int, b: int) -> int:
    if K.D is None:
        return a
    return a * a + a * b * K.trace_omega + b * b * K.norm_omega


def conjugate(x: AlgInt) -> AlgInt:
    if x.K.D is None:
        return x
    return AlgInt(x.a + x.b * x.K.trace_omega, -x.b, x.K)


def exact_quotient(x: AlgInt, y: AlgInt) -> AlgInt | None:
    """y / x when it lies in O_K, else None."""
    if not x:
        raise ZeroDivisionError("division by zero element")
    K = x.K
    if K.D is None:
        return AlgInt(y.a // x.a, 0, K) if y.a % x.a == 0 else None
    n = x.norm()
    c, d = mul_coords(K, (y.a, y.b), (conjugate(x).a, conjugate(x).b))
    if c % n or d % n:
        return None
    return AlgInt(c // n, d // n, K)


def divides(x: AlgInt, y: AlgInt) -> bool:
    return exact_quotient(x, y) is not None


def unit_inverse(u: AlgInt) -> AlgInt:
    n = u.norm()
    if abs(n) != 1:
        raise FieldError(f"{u} is not a unit")
    c = conjugate(u)
    return c if n == 1 else -c


def is_unit(x: AlgInt) -> bool:
    return abs(x.norm()) == 1


def _fundamental_unit(D: int, mode: str) -> tuple[tuple[int, int], int]:
    """First convergent p/q of w with |N(p - q*conj(w))| = 1.

    w = (P + sqrt(D)) / Q is expanded with the usual (P, Q) recurrence;
    p - q*conj(w) = (p - q*Tr(w)) + q*w.
    """
    if mode == "sqrtD":
        P, Q, t, n = 0, 1, 0, -D
    else:
        P, Q, t, n = 1, 2, 1, (1 - D) // 4
    s = math.isqrt(D)
    p_prev, p = 0, 1
    q_prev, q = 1, 0
    while True:
        a_k = (P + s) // Q
        p_prev, p = p, a_k * p + p_prev
        q_prev, q = q, a_k * q + q_prev
        N = p * p - p * q * t + q * q * n
        if abs(N) == 1:
            return (p - q * t, q), N
        P = a_k * Q - P
        Q = (D - P * P) // Q


def continued_fraction_omega(K: FieldCtx) -> tuple[list[int], int]:
    """Partial quotients of w up to and including one full period.

    Returns (quotients, start_of_period).
    """
    if K.D is None:
        raise FieldError("no continued fraction for Q")
    D = K.D
    P, Q = (0, 1) if K.omega_mode == "sqrtD" else (1, 2)
    s = math.isqrt(D)
    seen: dict[tuple[int, int], int] = {}
    quotients: list[int] = []
    while (P, Q) not in seen:
        seen[(P, Q)] = len(quotients)
        a_k = (P + s) // Q
        quotients.append(a_k)
        P = a_k * Q - P
        Q = (D - P * P) // Q
    return quotients, seen[(P, Q)]


@lru_cache(maxsize=None)
def _make_field(D: int | None) -> FieldCtx:
    if D is None:
        return FieldCtx(None, "rational", 1, 0, 0, (1, 0), 1)
    if D <= 1:
        raise FieldError(f"D must be >= 2, got {D}")
    f = _squarefree_factor(D)
    if f is not None:
        raise FieldError(f"D = {D} is not squarefree: divisible by {f}^2 = {f * f}")
    if D % 4 == 1:
        mode, disc, t, n = "half", D, 1, (1 - D) // 4
    else:
        mode, disc, t, n = "sqrtD", 4 * D, 0, -D
    unit, unit_norm = _fundamental_unit(D, mode)
    return FieldCtx(D, mode, disc, t, n, unit, unit_norm)


def make_field(descriptor) -> FieldCtx:
    """Build a field from ``"Q"``, ``"Qsqrt:D"``, ``"D"``, an int, or a wire dict."""
    if isinstance(descriptor, FieldCtx):
        return descriptor
    if isinstance(descriptor, dict):
        kind = descriptor.get("type")
        if kind == "Q":
            return _make_field(None)
        if kind == "Qsqrt":
            return make_field(int(descriptor["D"]))
        raise FieldError(f"unknown field object {descriptor!r}")
    if isinstance(descriptor, bool):
        raise FieldError(f"bad field descriptor {descriptor!r}")
    if isinstance(descriptor, int):
        return _make_field(descriptor)
    if isinstance(descriptor, str):
        s = descriptor.strip()
        if s in ("Q", "QQ", "rational"):
            return _make_field(None)
        for prefix in ("Qsqrt:", "Qsqrt", "sqrt:", "D="):
            if s.startswith(prefix):
                s = s[len(prefix):]
                break
        try:
            return _make_field(int(s))
        except ValueError:
            raise FieldError(f"bad field descriptor {descriptor!r}") from None
    raise FieldError(f"bad field descriptor {descriptor!r}")


QQ = make_field("Q")


def embedding_floor(x: AlgInt, i: int) -> int:
    """Exact floor of sigma_i(x)."""
    K = x.K
    if K.D is None:
        return x.a
    p, q = _pq(K, x.a, x.b, i)
    # floor(q*sqrt(D)) exactly
    r = math.isqrt(q * q * K.D)
    qs = r if q >= 0 else -r - (0 if r * r == q * q * K.D else 1)
    den = 1 if K.omega_mode == "sqrtD" else 2
    return (p + qs) // den


def compare_at(x: AlgInt, y: AlgInt, i: int) -> int:
    """Sign of sigma_i(x) - sigma_i(y)."""
    d = x - y
    return embedding_sign(d.K, d.a, d.b, i)
