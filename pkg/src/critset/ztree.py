"""Escalation trees over Z with full cross terms.

Forms use the same M-encoding as the forms module: Q(e_i) on the diagonal
and 2B(e_i, e_j) off it.  Isometric children are merged through
``reduce_form``, whose output is a canonical Gram matrix.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .forms import FormError, QForm, ValueSweep, gram_form, raw_gram, validate
from .ring import QQ

MAX_RANK = 5

IntMatrix = tuple[tuple[int, ...], ...]


@dataclass(eq=False)
class EscalationNode:
    form: QForm
    truant: int | None
    children: list[EscalationNode] = field(default_factory=list)
    id: int = 0

    @property
    def depth(self) -> int:
        return self.form.rank

    @property
    def key(self) -> IntMatrix:
        return int_matrix(self.form)


def int_matrix(form: QForm) -> IntMatrix:
    return tuple(tuple(e.a for e in row) for row in form.M)


def z_form(M) -> QForm:
    if not M:
        return validate(raw_gram(QQ, ()))
    return gram_form(QQ, [[int(v) for v in row] for row in M])


def z_mask(form: QForm, bound: int) -> np.ndarray:
    """Boolean array: mask[n] is True iff the form represents n (n <= bound)."""
    sw = ValueSweep(form, bound)
    return sw._mask


def z_truant(form: QForm, bound: int) -> int | None:
    miss = np.flatnonzero(~z_mask(form, bound))
    miss = miss[miss > 0]
    return int(miss[0]) if len(miss) else None


# ---------------------------------------------------------------------------
# reduction


def _value(M: IntMatrix, v) -> int:
    n = len(v)
    s = 0
    for i in range(n):
        if v[i]:
            s += M[i][i] * v[i] * v[i]
            for j in range(i + 1, n):
                s += M[i][j] * v[i] * v[j]
    return s


def _bil(M: IntMatrix, v, w) -> int:
    """2B(v, w)."""
    n = len(v)
    s = 0
    for i in range(n):
        for j in range(n):
            if v[i] and w[j]:
                s += (2 * M[i][j] if i == j else M[i][j]) * v[i] * w[j]
    return s


def _short_vectors(form: QForm, T: int) -> list[tuple[tuple[int, ...], int]]:
    """Vectors with 0 < Q(v) <= T, one of each +/- pair."""
    blk = form._blocks
    M = int_matrix(form)
    n = form.rank
    out = []
    if len(blk) == 1:
        vecs = (vec for vec, _ in blk[0].vectors((T + 0.5,)))
        for vec in vecs:
            v = tuple(c[0] for c in vec)
            out.append(v)
    else:
        # orthogonal blocks: combine block vectors (small ranks only)
        parts = []
        for b in blk:
            pv = []
            for vec, val in b.vectors((T + 0.5,)):
                pv.append((b.idx, tuple(c[0] for c in vec)))
            parts.append(pv)
        for combo in itertools.product(*parts):
            v = [0] * n
            for idx, vv in combo:
                for pos, c in zip(idx, vv):
                    v[pos] = c
            out.append(tuple(v))
    res = []
    for v in out:
        q = _value(M, v)
        if 0 < q <= T:
            first = next(c for c in v if c)
            if first > 0:
                res.append((v, q))
    res.sort(key=lambda p: (p[1], p[0]))
    return res


def _det(rows: list[list[int]]) -> int:
    n = len(rows)
    if n == 0:
        return 1
    A = [r[:] for r in rows]
    prev = 1
    sign = 1
    for k in range(n - 1):
        if A[k][k] == 0:
            sw = next((i for i in range(k + 1, n) if A[i][k]), None)
            if sw is None:
                return 0
            A[k], A[sw] = A[sw], A[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                A[i][j] = (A[i][j] * A[k][k] - A[i][k] * A[k][j]) // prev
        prev = A[k][k]
    return sign * A[n - 1][n - 1]


def _primitive(vs: list[tuple[int, ...]], n: int) -> bool:
    """Whether vs extends to a basis of Z^n (gcd of maximal minors is 1)."""
    k = len(vs)
    g = 0
    for cols in itertools.combinations(range(n), k):
        g = math.gcd(g, _det([[v[c] for c in cols] for v in vs]))
        if g == 1:
            return True
    return False


def _spans(vs: list[tuple[int, ...]], n: int) -> bool:
    """Whether the vectors generate Z^n (integer row echelon)."""
    rows = [list(v) for v in vs]
    for col in range(n):
        live = [r for r in rows if r[col]]
        if not live:
            return False
        # Euclid on the column until one row keeps a nonzero entry
        while len(live) > 1:
            live.sort(key=lambda r: abs(r[col]))
            p = live[0]
            for r in live[1:]:
                q = r[col] // p[col]
                for j in range(col, n):
                    r[j] -= q * p[j]
            live = [r for r in live if r[col]]
        if abs(live[0][col]) != 1:
            return False
        rows = [r for r in rows if r is not live[0]]
    return True


@lru_cache(maxsize=100_000)
def _canonical(M: IntMatrix) -> IntMatrix:
    n = len(M)
    if n == 0:
        return M
    form = z_form(M)
    T_up = max(M[i][i] for i in range(n))
    short = _short_vectors(form, T_up)
    # smallest T for which vectors of norm <= T generate the lattice
    norms = sorted({q for _, q in short})
    T = T_up
    acc = []
    vi = 0
    for t in norms:
        while vi < len(short) and short[vi][1] <= t:
            acc.append(short[vi][0])
            vi += 1
        if len(acc) >= n and _spans(acc, n):
            T = t
            break
    cands = [(v, q) for v, q in short if q <= T]
    best: list = [None]

    def finish(basis):
        diag = tuple(q for _, q in basis)
        vs = [v for v, _ in basis]
        G = [[_bil(M, vs[i], vs[j]) for j in range(n)] for i in range(n)]
        bestoff = None
        for signs in itertools.product((1, -1), repeat=n - 1):
            s = (1,) + signs
            off = tuple(G[i][j] * s[i] * s[j] for i in range(n) for j in range(i + 1, n))
            if bestoff is None or off < bestoff:
                bestoff = off
        key = diag + bestoff
        if best[0] is None or key < best[0]:
            best[0] = key

    def rec(basis, start_q):
        i = len(basis)
        if i == n:
            finish(basis)
            return
        for v, q in cands:
            if q < start_q:
                continue
            if best[0] is not None:
                partial = tuple(p for _, p in basis) + (q,)
                if partial > best[0][: i + 1]:
                    break
            if any(v == b for b, _ in basis):
                continue
            vs = [b for b, _ in basis] + [v]
            if not _primitive(vs, n):
                continue
            rec(basis + [(v, q)], q)

    rec([], 0)
    key = best[0]
    diag = key[:n]
    off = key[n:]
    out = [[0] * n for _ in range(n)]
    k = 0
    for i in range(n):
        out[i][i] = diag[i]
        for j in range(i + 1, n):
            out[i][j] = out[j][i] = off[k]
            k += 1
    return tuple(tuple(r) for r in out)


def reduce_form(form: QForm) -> QForm:
    """Canonical representative of the Z-isometry class.

    Among all bases made of vectors of norm <= T (T the least value such
    that those vectors generate the lattice) with non-decreasing norms, pick
    the lexicographically least (diagonal, off-diagonal) Gram data.
    """
    if form.field.degree != 1:
        raise FormError("reduce_form works over Z only")
    if form.rank > MAX_RANK:
        raise FormError(f"rank {form.rank} exceeds {MAX_RANK}")
    if not form.validated:
        form = validate(form)
    return z_form(_canonical(int_matrix(form)))


# ---------------------------------------------------------------------------
# escalation


def _cross_terms(M: IntMatrix, t: int, X: str) -> list[tuple[int, ...]]:
    n = len(M)
    if X == "diag" or n == 0:
        return [(0,) * n]
    ranges = []
    for i in range(n):
        lim = math.isqrt(4 * M[i][i] * t)
        vals = range(-lim, lim + 1)
        if X == "cl":
            vals = [m for m in vals if m % 2 == 0]
        ranges.append(list(vals))
    out = []
    for combo in itertools.product(*ranges):
        first = next((m for m in combo if m), 0)
        if first >= 0:
            out.append(combo)
    return out


def _pd(M: list[list[int]]) -> bool:
    n = len(M)
    G = [[M[i][j] * (2 if i == j else 1) for j in range(n)] for i in range(n)]
    return all(_det([row[:k] for row in G[:k]]) > 0 for k in range(1, n + 1))


def escalation_forms(form: QForm, t: int, X: str, orthogonal_only: bool = False) -> list[QForm]:
    """Canonical forms of the escalations of ``form`` by its truant t.

    cl/nc: add a vector of norm t with every admissible cross term.
    diag: add <c> for each c <= t such that the result represents t; with
    ``orthogonal_only`` just the single child form + <t>.
    """
    if X not in ("diag", "cl", "nc"):
        raise FormError(f"unknown X {X!r}")
    M = int_matrix(form)
    n = len(M)
    seen = set()
    if X == "diag":
        if any(M[i][j] for i in range(n) for j in range(n) if i != j):
            raise FormError("diagonal escalation of a non-diagonal form")
        d = [M[i][i] for i in range(n)]
        cs = [t] if orthogonal_only else range(1, t + 1)
        for c in cs:
            key = tuple(sorted(d + [c]))
            if c == t or _diag_represents(d, c, t):
                seen.add(tuple(tuple(key[i] if i == j else 0 for j in range(n + 1)) for i in range(n + 1)))
        return [z_form(k) for k in sorted(seen)]
    for cross in _cross_terms(M, t, X):
        N = [list(r) + [cross[i]] for i, r in enumerate(M)] + [list(cross) + [t]]
        if not _pd(N):
            continue
        seen.add(_canonical(tuple(tuple(r) for r in N)))
    return [z_form(k) for k in sorted(seen)]


def _diag_represents(d: list[int], c: int, t: int) -> bool:
    # is t = c*x^2 + (value of <d>) for some x >= 1
    mask = z_mask(z_form([[d[i] if i == j else 0 for j in range(len(d))] for i in range(len(d))]), t)
    x = 1
    while c * x * x <= t:
        if mask[t - c * x * x]:
            return True
        x += 1
    return False


def _sorted_diag(M: IntMatrix) -> list[list[int]]:
    d = sorted(M[i][i] for i in range(len(M)))
    return [[d[i] if i == j else 0 for j in range(len(d))] for i in range(len(d))]


def escalations_of(
    node: EscalationNode, X: str, probe_bound: int = 2000, orthogonal_only: bool = False
) -> list[EscalationNode]:
    if node.truant is None:
        return []
    forms = escalation_forms(node.form, node.truant, X, orthogonal_only)
    return [EscalationNode(f, z_truant(f, probe_bound)) for f in forms]


@dataclass
class TreeStats:
    X: str
    max_rank: int
    probe_bound: int
    nodes_per_rank: dict[int, int]
    truants_per_rank: dict[int, list[int]]
    truants: list[int]
    leaves_without_truant: int


def build_tree(
    X: str,
    max_rank: int,
    probe_bound: int = 2000,
    stop_above: int | None = None,
) -> tuple[EscalationNode, TreeStats]:
    """Breadth-first escalation from the zero form; isometric nodes within a
    layer are shared.  ``stop_above`` skips expanding nodes whose truant
    exceeds it (truants only grow along a path)."""
    if max_rank > MAX_RANK:
        raise FormError(f"max_rank is capped at {MAX_RANK}")
    root = EscalationNode(z_form(()), z_truant(z_form(()), probe_bound), id=0)
    layer = [root]
    nid = 1
    per_rank = {0: 1}
    truants_rank = {0: [root.truant] if root.truant else []}
    leaves = 0
    for rank in range(1, max_rank + 1):
        nxt: dict[IntMatrix, EscalationNode] = {}
        for node in layer:
            if node.truant is None:
                continue
            if stop_above is not None and node.truant > stop_above:
                continue
            for f in escalation_forms(node.form, node.truant, X):
                k = int_matrix(f)
                child = nxt.get(k)
                if child is None:
                    child = EscalationNode(f, z_truant(f, probe_bound), id=nid)
                    nid += 1
                    nxt[k] = child
                node.children.append(child)
        layer = list(nxt.values())
        per_rank[rank] = len(layer)
        truants_rank[rank] = sorted({n.truant for n in layer if n.truant is not None})
        leaves += sum(1 for n in layer if n.truant is None)
    collected = sorted({t for ts in truants_rank.values() for t in ts})
    return root, TreeStats(X, max_rank, probe_bound, per_rank, truants_rank, collected, leaves)


def iter_nodes(root: EscalationNode):
    seen = set()
    queue = [root]
    while queue:
        nxt = []
        for n in queue:
            if n.id in seen:
                continue
            seen.add(n.id)
            yield n
            nxt.extend(n.children)
        queue = nxt


def tree_to_json(root: EscalationNode, stats: TreeStats) -> dict:
    nodes = []
    for n in iter_nodes(root):
        nodes.append({
            "id": n.id,
            "rank": n.depth,
            "M": [list(r) for r in n.key],
            "truant": n.truant,
            "children": sorted({c.id for c in n.children}),
        })
    nodes.sort(key=lambda d: d["id"])
    return {
        "X": stats.X,
        "max_rank": stats.max_rank,
        "probe_bound": stats.probe_bound,
        "nodes_per_rank": {str(k): v for k, v in stats.nodes_per_rank.items()},
        "truants_per_rank": {str(k): v for k, v in stats.truants_per_rank.items()},
        "truants": stats.truants,
        "leaves_without_truant": stats.leaves_without_truant,
        "nodes": nodes,
    }


def tree_to_csv(root: EscalationNode) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rank", "form", "truant"])
    for n in iter_nodes(root):
        form = ";".join(" ".join(str(v) for v in r) for r in n.key)
        w.writerow([n.depth, form, "" if n.truant is None else n.truant])
    return buf.getvalue()
