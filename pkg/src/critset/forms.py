"""Totally positive definite quadratic forms over O_K and representation tests.

A form is stored as a symmetric matrix ``M`` with ``Q(x) = sum M_ii x_i^2 +
sum_{i<j} M_ij x_i x_j``, i.e. ``M_ij = 2B(e_i, e_j)`` off the diagonal, so
non-classical forms still have entries in O_K.

Vectors are enumerated Fincke-Pohst style at both embeddings at once: each
coordinate ``x_i = u + v*w`` is confined to an interval at every embedding,
which pins down a small parallelogram of ``(u, v)``.  Interval arithmetic is
done in floats widened outward; every accepted value is recomputed exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterator, Sequence

import numpy as np

from .elements import (
    SquareClass,
    _class_box,
    box_coords,
    class_of,
    enumerate_classes,
    is_canonical_coords,
)
from .ring import (
    AlgInt,
    FieldCtx,
    FieldError,
    conjugate,
    embedding_sign,
    exact_quotient,
    is_tp_coords,
    mul_coords,
    norm_coords,
)

_REL = 1e-9


class FormError(ValueError):
    pass


Coords = tuple[int, int]


@dataclass(frozen=True)
class QForm:
    field: FieldCtx
    M: tuple[tuple[AlgInt, ...], ...]
    kind: str = "gram"
    classical: bool = True
    validated: bool = False

    @property
    def rank(self) -> int:
        return len(self.M)

    @property
    def coeffs(self) -> list[AlgInt]:
        if self.kind != "diag":
            raise FormError("not a diagonal form")
        return [self.M[i][i] for i in range(self.rank)]

    @property
    def is_diagonal(self) -> bool:
        return all(not self.M[i][j] for i in range(self.rank) for j in range(self.rank) if i != j)

    @property
    def X(self) -> str:
        """Narrowest of diag / cl / nc this form belongs to."""
        if self.kind == "diag" or self.is_diagonal:
            return "diag"
        return "cl" if self.classical else "nc"

    def value(self, x: Sequence[AlgInt | int]) -> AlgInt:
        K = self.field
        xs = [(v.a, v.b) if isinstance(v, AlgInt) else (int(v), 0) for v in x]
        if len(xs) != self.rank:
            raise FormError("vector length does not match rank")
        a, b = _evaluate(K, self._Mc, xs)
        return AlgInt(a, b, K)

    @cached_property
    def _Mc(self) -> tuple[tuple[Coords, ...], ...]:
        return tuple(tuple((e.a, e.b) for e in row) for row in self.M)

    @cached_property
    def _blocks(self) -> list[_Block]:
        n = self.rank
        seen = [False] * n
        blocks = []
        for s in range(n):
            if seen[s]:
                continue
            comp, stack = [], [s]
            seen[s] = True
            while stack:
                i = stack.pop()
                comp.append(i)
                for j in range(n):
                    if not seen[j] and self.M[i][j]:
                        seen[j] = True
                        stack.append(j)
            comp.sort()
            blocks.append(_Block(self.field, comp, tuple(tuple(self._Mc[i][j] for j in comp) for i in comp)))
        return blocks

    def __str__(self) -> str:
        if self.kind == "diag":
            return "<" + ", ".join(str(c) for c in self.coeffs) + ">"
        return "[" + "; ".join(" ".join(str(e) for e in row) for row in self.M) + "]"


def _evaluate(K: FieldCtx, Mc, xs: Sequence[Coords]) -> Coords:
    a = b = 0
    n = len(xs)
    for i in range(n):
        xi = xs[i]
        if xi == (0, 0):
            continue
        sq = mul_coords(K, xi, xi)
        p = mul_coords(K, Mc[i][i], sq)
        a += p[0]
        b += p[1]
        for j in range(i + 1, n):
            if Mc[i][j] == (0, 0) or xs[j] == (0, 0):
                continue
            p = mul_coords(K, Mc[i][j], mul_coords(K, xi, xs[j]))
            a += p[0]
            b += p[1]
    return (a, b)


# ---------------------------------------------------------------------------
# construction and validation


def _as_elem(K: FieldCtx, v) -> AlgInt:
    if isinstance(v, AlgInt):
        if v.K != K:
            raise FormError(f"coefficient {v} lives in {v.K}, not {K}")
        return v
    if isinstance(v, bool):
        raise FormError(f"bad coefficient {v!r}")
    if isinstance(v, int):
        return K.elem(v)
    if isinstance(v, (tuple, list)) and len(v) == 2:
        return K.elem(int(v[0]), int(v[1]))
    raise FormError(f"bad coefficient {v!r}")


def raw_diag(K: FieldCtx, coeffs) -> QForm:
    cs = [_as_elem(K, c) for c in coeffs]
    n = len(cs)
    M = tuple(tuple(cs[i] if i == j else K.zero for j in range(n)) for i in range(n))
    return QForm(K, M, "diag", True, False)


def raw_gram(K: FieldCtx, M) -> QForm:
    rows = tuple(tuple(_as_elem(K, e) for e in row) for row in M)
    return QForm(K, rows, "gram", True, False)


def _det_minors(G: list[list[AlgInt]]) -> list[AlgInt]:
    """Leading principal minors by fraction-free (Bareiss) elimination."""
    n = len(G)
    A = [row[:] for row in G]
    minors = []
    prev = None
    for k in range(n):
        piv = A[k][k]
        minors.append(piv)
        if not piv:
            break
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                num = A[i][j] * piv - A[i][k] * A[k][j]
                if prev is None:
                    A[i][j] = num
                else:
                    q = exact_quotient(prev, num)
                    assert q is not None
                    A[i][j] = q
        prev = piv
    return minors


def validate(form: QForm) -> QForm:
    """Check symmetry, integrality and total positive definiteness."""
    K = form.field
    n = form.rank
    for row in form.M:
        if len(row) != n:
            raise FormError("Gram matrix is not square")
        for e in row:
            if not isinstance(e, AlgInt) or e.K != K:
                raise FormError(f"entry {e!r} is not an integer of {K}")
    for i in range(n):
        for j in range(i + 1, n):
            if form.M[i][j] != form.M[j][i]:
                raise FormError(f"Gram matrix is not symmetric at ({i}, {j})")
    if form.kind == "diag":
        if not form.is_diagonal:
            raise FormError("diag form with off-diagonal entries")
        for i, c in enumerate(form.coeffs):
            if not is_tp_coords(K, c.a, c.b):
                bad = [j for j in range(K.degree) if embedding_sign(K, c.a, c.b, j) <= 0]
                raise FormError(f"coefficient {i} = {c} is not positive at embedding {bad[0] + 1}")
        return QForm(K, form.M, "diag", True, True)
    # doubled B-matrix: 2*M_ii on the diagonal, M_ij off it
    G = [[form.M[i][j] * (2 if i == j else 1) for j in range(n)] for i in range(n)]
    for k, m in enumerate(_det_minors(G)):
        for j in range(K.degree):
            if embedding_sign(K, m.a, m.b, j) <= 0:
                raise FormError(
                    f"not positive definite: leading minor of size {k + 1} is {m}, "
                    f"non-positive at embedding {j + 1}"
                )
    classical = all(form.M[i][j].a % 2 == 0 and form.M[i][j].b % 2 == 0 for i in range(n) for j in range(n) if i != j)
    kind = "gram"
    return QForm(K, form.M, kind, classical, True)


def diag_form(K: FieldCtx, coeffs) -> QForm:
    return validate(raw_diag(K, coeffs))


def gram_form(K: FieldCtx, M) -> QForm:
    return validate(raw_gram(K, M))


def zero_form(K: FieldCtx) -> QForm:
    return QForm(K, (), "diag", True, True)


# ---------------------------------------------------------------------------
# transforms


def orthogonal_sum(f: QForm, g: QForm) -> QForm:
    if f.field != g.field:
        raise FormError(f"field mismatch: {f.field} vs {g.field}")
    K = f.field
    n, m = f.rank, g.rank
    Z = K.zero
    rows = [tuple(f.M[i]) + (Z,) * m for i in range(n)]
    rows += [(Z,) * n + tuple(g.M[i]) for i in range(m)]
    kind = "diag" if f.kind == "diag" and g.kind == "diag" else "gram"
    return validate(QForm(K, tuple(rows), kind, True, False))


def scale(f: QForm, c) -> QForm:
    c = _as_elem(f.field, c)
    if not is_tp_coords(f.field, c.a, c.b):
        raise FormError(f"scale factor {c} is not totally positive")
    M = tuple(tuple(e * c for e in row) for row in f.M)
    return validate(QForm(f.field, M, f.kind, True, False))


def conjugate_form(f: QForm) -> QForm:
    M = tuple(tuple(conjugate(e) for e in row) for row in f.M)
    return validate(QForm(f.field, M, f.kind, True, False))


def transform(form: QForm, action: str, arg=None) -> QForm:
    if action == "orthogonal_sum":
        return orthogonal_sum(form, arg)
    if action == "scale":
        return scale(form, arg)
    if action == "conjugate":
        return conjugate_form(form)
    raise FormError(f"unknown action {action!r}")


def lift_form(zform: QForm, K: FieldCtx) -> QForm:
    if zform.field.degree != 1:
        raise FormError("lift_form expects a form over Q")
    M = tuple(tuple(K.elem(e.a) for e in row) for row in zform.M)
    return validate(QForm(K, M, zform.kind, True, False))


# ---------------------------------------------------------------------------
# enumeration


class _Block:
    """An orthogonal block with per-embedding Fincke-Pohst data."""

    def __init__(self, K: FieldCtx, idx: list[int], Mc):
        self.K = K
        self.idx = idx
        self.Mc = Mc
        self.k = len(idx)
        self.chol = [self._cholesky(j) for j in range(K.degree)]

    def _cholesky(self, j: int) -> list[list[float]]:
        K = self.K
        w = K.w1 if j == 0 else K.w2
        k = self.k
        A = [[0.0] * k for _ in range(k)]
        for i in range(k):
            for l in range(k):
                a, b = self.Mc[i][l]
                v = a + b * w
                A[i][l] = v if i == l else v / 2
        q = [[0.0] * k for _ in range(k)]
        for i in range(k):
            s = A[i][i] - sum(q[m][m] * q[m][i] ** 2 for m in range(i))
            if s <= 0:
                raise FormError("form is not positive definite (numerically)")
            q[i][i] = s
            for l in range(i + 1, k):
                q[i][l] = (A[i][l] - sum(q[m][m] * q[m][i] * q[m][l] for m in range(i))) / s
        return q

    def vectors(self, T: Sequence[float]) -> Iterator[tuple[list[Coords], Coords]]:
        """All block vectors x (proposed superset) with sigma_j(Q(x)) <= T_j."""
        K = self.K
        deg = K.degree
        k = self.k
        ws = (K.w1, K.w2)[:deg]
        tol = [_REL * (abs(t) + 1.0) for t in T]
        x: list[Coords] = [(0, 0)] * k
        emb = [[0.0] * k for _ in range(deg)]
        chol = self.chol

        def rec(i: int, R: list[float]):
            cs, rs = [], []
            for j in range(deg):
                q = chol[j]
                c = -sum(q[i][l] * emb[j][l] for l in range(i + 1, k))
                r = math.sqrt(max(R[j], 0.0) / q[i][i]) * (1 + _REL) + _REL
                cs.append(c)
                rs.append(r)
            if deg == 1:
                cands = box_coords(K, cs[0] - rs[0], cs[0] + rs[0], 0.0, 0.0)
            else:
                cands = box_coords(K, cs[0] - rs[0], cs[0] + rs[0], cs[1] - rs[1], cs[1] + rs[1])
            for u, v in cands:
                newR = []
                ok = True
                for j in range(deg):
                    e = u + v * ws[j]
                    d = e - cs[j]
                    nr = R[j] - chol[j][i][i] * d * d
                    if nr < -tol[j]:
                        ok = False
                        break
                    newR.append(nr)
                    emb[j][i] = e
                if not ok:
                    continue
                x[i] = (u, v)
                if i == 0:
                    yield list(x), _evaluate(K, self.Mc, x)
                else:
                    yield from rec(i - 1, newR)
            for j in range(deg):
                emb[j][i] = 0.0
            x[i] = (0, 0)

        yield from rec(k - 1, list(T))


def _z_block_values(blk: _Block, bound: int) -> list[int]:
    """Sorted distinct values <= bound of a block over Z.

    The two innermost coordinates are swept as a numpy grid; outer ones are
    walked Fincke-Pohst style.  Values are exact int64 arithmetic."""
    k = blk.k
    if k == 1:
        a = blk.Mc[0][0][0]
        r = math.isqrt(bound // a)
        return sorted({a * x * x for x in range(r + 1)})
    M = np.array([[blk.Mc[i][j][0] for j in range(k)] for i in range(k)], dtype=np.int64)
    q = blk.chol[0]
    T = _pad(float(bound))
    seen = np.zeros(bound + 1, dtype=bool)
    x = [0] * k

    def inner(R: float):
        out = x[2:]
        L0 = int(sum(M[0][j] * out[j - 2] for j in range(2, k)))
        L1 = int(sum(M[1][j] * out[j - 2] for j in range(2, k)))
        C = 0
        for i in range(2, k):
            for j in range(i, k):
                C += int(M[i][j]) * x[i] * x[j]
        c1 = -sum(q[1][l] * x[l] for l in range(2, k))
        r1 = math.sqrt(max(R, 0.0) / q[1][1]) * (1 + _REL) + _REL
        x1 = np.arange(math.floor(c1 - r1), math.ceil(c1 + r1) + 1, dtype=np.int64)
        c0 = -q[0][1] * x1 - sum(q[0][l] * x[l] for l in range(2, k))
        R0 = np.maximum(R - q[1][1] * (x1 - c1) ** 2, 0.0)
        r0 = np.sqrt(R0 / q[0][0]) * (1 + _REL) + _REL
        x0 = np.arange(math.floor(float(np.min(c0 - r0))), math.ceil(float(np.max(c0 + r0))) + 1, dtype=np.int64)
        X0, X1 = np.meshgrid(x0, x1)
        v = M[0][0] * X0 * X0 + M[1][1] * X1 * X1 + M[0][1] * X0 * X1 + L0 * X0 + L1 * X1 + C
        v = v[(v >= 0) & (v <= bound)]
        seen[v] = True

    def rec(i: int, R: float):
        if i == 1:
            inner(R)
            return
        c = -sum(q[i][l] * x[l] for l in range(i + 1, k))
        r = math.sqrt(max(R, 0.0) / q[i][i]) * (1 + _REL) + _REL
        for u in range(math.floor(c - r), math.ceil(c + r) + 1):
            nr = R - q[i][i] * (u - c) ** 2
            if nr < -_REL * (T + 1):
                continue
            x[i] = u
            rec(i - 1, nr)
        x[i] = 0

    rec(k - 1, T)
    return [int(v) for v in np.flatnonzero(seen)]


def _emb(K: FieldCtx, c: Coords) -> tuple[float, float]:
    return (c[0] + c[1] * K.w1, c[0] + c[1] * K.w2)


def _pad(t: float) -> float:
    return t * (1 + _REL) + _REL


def value_set(form: QForm, box: tuple[float, float]) -> set[Coords]:
    """Exact values of ``form`` whose embeddings fit in ``box`` (a superset
    filtered with a small outward tolerance).  Built block by block as a
    clipped sumset, so orthogonal sums never enumerate joint vectors."""
    K = form.field
    X, Y = _pad(box[0]), _pad(box[1])
    acc = {(0, 0): (0.0, 0.0)}
    for blk in form._blocks:
        vals = {}
        for _, val in blk.vectors((X, Y)):
            if val not in vals:
                vals[val] = _emb(K, val)
        acc = _sumset(acc, vals, X, Y, K.degree)
    return set(acc)


def _sumset(acc: dict, vals: dict, X: float, Y: float, deg: int) -> dict:
    out = {}
    items = list(vals.items())
    for (a, b), (e1, e2) in acc.items():
        for (c, d), (f1, f2) in items:
            g1 = e1 + f1
            if g1 > X:
                continue
            if deg == 2:
                g2 = e2 + f2
                if g2 > Y:
                    continue
            else:
                g2 = 0.0
            key = (a + c, b + d)
            if key not in out:
                out[key] = (g1, g2)
    return out


class ValueSweep:
    """Incrementally maintained value set of a form, clipped to the class box
    of ``bound``; used for escalation where forms grow by ⟨beta⟩ steps."""

    def __init__(self, form: QForm, bound: int):
        self.K = form.field
        self.bound = bound
        X, Y = _class_box(self.K, bound)
        self.X, self.Y = _pad(X), _pad(Y)
        self.form = form
        if self.K.degree == 1:
            # over Q a boolean mask indexed by value is much cheaper
            self._mask = np.zeros(bound + 1, dtype=bool)
            self._mask[0] = True
        else:
            self._acc = {(0, 0): (0.0, 0.0)}
        for blk in form._blocks:
            self._add_block(blk)

    def _add_block(self, blk: _Block) -> None:
        if self.K.degree == 1:
            vals = _z_block_values(blk, self.bound)
            old = self._mask
            new = np.zeros_like(old)
            for v in vals:
                new[v:] |= old[: len(old) - v]
            self._mask = new
            return
        vals = {}
        for _, val in blk.vectors((self.X, self.Y)):
            if val not in vals:
                vals[val] = _emb(self.K, val)
        self._acc = _sumset(self._acc, vals, self.X, self.Y, self.K.degree)

    def extend(self, other: QForm) -> None:
        self.form = orthogonal_sum(self.form, other)
        for blk in other._blocks:
            self._add_block(blk)

    def represented_keys(self) -> set[Coords]:
        K = self.K
        if K.degree == 1:
            return {(int(n), 0) for n in np.flatnonzero(self._mask) if n > 0}
        out = set()
        for a, b in self._acc:
            if (a, b) == (0, 0):
                continue
            if is_tp_coords(K, a, b) and norm_coords(K, a, b) <= self.bound and is_canonical_coords(K, a, b):
                out.add((a, b))
        return out


@lru_cache(maxsize=256)
def _represented_keys(form: QForm, bound: int) -> frozenset:
    return frozenset(ValueSweep(form, bound).represented_keys())


def represented_classes(form: QForm, bound: int) -> list[SquareClass]:
    """Classes of norm <= bound represented by the form (single sweep)."""
    _require_valid(form)
    keys = _represented_keys(form, int(bound))
    return [c for c in enumerate_classes(form.field, bound) if c.key in keys]


def non_represented_up_to(form: QForm, S, bound: int) -> list[SquareClass]:
    _require_valid(form)
    keys = _represented_keys(form, int(bound))
    return [c for c in enumerate_classes(form.field, bound) if (S is None or S.contains(c)) and c.key not in keys]


def is_universal_up_to(form: QForm, S, bound: int) -> bool:
    return not non_represented_up_to(form, S, bound)


def _require_valid(form: QForm) -> None:
    if not form.validated:
        raise FormError("form has not been validated")


def find_representation(form: QForm, target) -> list[AlgInt] | None:
    """A vector x with Q(x) = target, or None.  Exact depth-first search
    over orthogonal blocks with memoised dead ends."""
    _require_valid(form)
    K = form.field
    t = _as_elem(K, target)
    zero = [K.zero] * form.rank
    if not t:
        return zero
    if not is_tp_coords(K, t.a, t.b):
        return None
    blocks = form._blocks
    if not blocks:
        return None
    dead: set = set()

    def solve(bi: int, rem: Coords):
        if (bi, rem) in dead:
            return None
        blk = blocks[bi]
        e = _emb(K, rem)
        T = [_pad(e[0]), _pad(e[1])][: K.degree]
        last = bi == len(blocks) - 1
        for vec, val in blk.vectors(T):
            nr = (rem[0] - val[0], rem[1] - val[1])
            if nr == (0, 0):
                return [(bi, vec)]
            if last or not is_tp_coords(K, nr[0], nr[1]):
                continue
            sub = solve(bi + 1, nr)
            if sub is not None:
                return [(bi, vec)] + sub
        dead.add((bi, rem))
        return None

    sol = solve(0, (t.a, t.b))
    if sol is None:
        return None
    out = list(zero)
    for bi, vec in sol:
        vec = _sign_normal(K, vec)
        for pos, c in zip(blocks[bi].idx, vec):
            out[pos] = AlgInt(c[0], c[1], K)
    assert form.value(out) == t
    return out


def _sign_normal(K: FieldCtx, vec: list[Coords]) -> list[Coords]:
    # Q(-x) = Q(x) on a block; prefer the first nonzero coordinate positive
    for u, v in vec:
        if (u, v) != (0, 0):
            if embedding_sign(K, u, v, 0) < 0:
                return [(-a, -b) for a, b in vec]
            break
    return vec


def represents(form: QForm, target) -> bool:
    return find_representation(form, target) is not None


def canonical_json(form: QForm) -> dict:
    from .wire import form_to_json

    return form_to_json(form)
