"""JSON wire formats for fields, elements, classes and forms."""

from __future__ import annotations

import json
import re

from .elements import SquareClass, class_of, is_indecomposable, is_squarefree
from .forms import FormError, QForm, raw_diag, raw_gram, validate
from .ring import AlgInt, FieldCtx, FieldError, make_field

_I64 = 2**63


class WireError(ValueError):
    pass


def int_out(n: int):
    return n if -_I64 <= n < _I64 else str(n)


def int_in(v) -> int:
    if isinstance(v, bool):
        raise WireError(f"expected an integer, got {v!r}")
    if isinstance(v, int):
        return v
    if isinstance(v, str) and re.fullmatch(r"[+-]?\d+", v.strip()):
        return int(v)
    raise WireError(f"expected an integer, got {v!r}")


def field_to_json(K: FieldCtx) -> dict:
    return {"type": "Q"} if K.D is None else {"type": "Qsqrt", "D": K.D}


def field_from_json(d) -> FieldCtx:
    try:
        return make_field(d)
    except FieldError:
        raise
    except (TypeError, ValueError, KeyError) as e:
        raise WireError(f"bad field descriptor {d!r}: {e}") from None


def elem_to_json(x: AlgInt) -> dict:
    return {"a": int_out(x.a), "b": int_out(x.b)}


_WPART = re.compile(r"(?:([+-]?\d+)(?=[+-]))?([+-]?)(\d*)")


def parse_shorthand(s: str) -> tuple[int, int]:
    """'a+b*w', '3', 'w', '-2w', '1-w' -> (a, b)."""
    t = s.replace(" ", "")
    if not t.endswith("w"):
        if not re.fullmatch(r"[+-]?\d+", t):
            raise WireError(f"cannot parse element {s!r}")
        return int(t), 0
    body = t[:-1]
    if body.endswith("*"):
        body = body[:-1]
        if not body or not body[-1].isdigit():
            raise WireError(f"cannot parse element {s!r}")
    m = _WPART.fullmatch(body)
    if not m:
        raise WireError(f"cannot parse element {s!r}")
    a = int(m.group(1)) if m.group(1) else 0
    b = int(m.group(3)) if m.group(3) else 1
    return a, -b if m.group(2) == "-" else b


def elem_from_json(K: FieldCtx, v) -> AlgInt:
    if isinstance(v, dict):
        if set(v) - {"a", "b"} or "a" not in v:
            raise WireError(f"element object needs keys a[, b]: {v!r}")
        a, b = int_in(v["a"]), int_in(v.get("b", 0))
    elif isinstance(v, (int, str)) and not isinstance(v, bool):
        if isinstance(v, int):
            a, b = v, 0
        else:
            t = v.strip()
            if t.startswith("{"):
                try:
                    return elem_from_json(K, json.loads(t))
                except json.JSONDecodeError as e:
                    raise WireError(f"malformed element JSON: {e}") from None
            a, b = parse_shorthand(t)
    else:
        raise WireError(f"bad element {v!r}")
    if K.degree == 1 and b:
        raise WireError("elements of Q must have b = 0")
    return K.elem(a, b)


def class_to_json(c: SquareClass) -> dict:
    return {"rep": elem_to_json(c.rep), "norm": int_out(c.norm)}


def form_to_json(f: QForm) -> dict:
    d = {"field": field_to_json(f.field), "kind": f.kind}
    if f.kind == "diag":
        d["coeffs"] = [elem_to_json(c) for c in f.coeffs]
    else:
        d["M"] = [[elem_to_json(e) for e in row] for row in f.M]
        d["classical"] = f.classical
    return d


def form_from_json(v, K: FieldCtx | None = None) -> QForm:
    """Form from a JSON object or string, or the shorthand 'diag:1,1,3,3'."""
    if isinstance(v, str):
        t = v.strip()
        if t.startswith("diag:"):
            body = t[5:].strip()
            parts = [p for p in body.split(",") if p.strip()] if body else []
            if K is None:
                raise WireError("a field is needed for shorthand forms")
            return _validated(raw_diag(K, [elem_from_json(K, p) for p in parts]))
        try:
            v = json.loads(t)
        except json.JSONDecodeError as e:
            raise WireError(f"malformed form JSON: {e}") from None
    if not isinstance(v, dict):
        raise WireError(f"bad form {v!r}")
    if "field" in v:
        F = field_from_json(v["field"])
        if K is not None and F != K:
            raise WireError(f"form field {F} does not match {K}")
        K = F
    if K is None:
        raise WireError("form has no field")
    kind = v.get("kind")
    if kind == "diag":
        if not isinstance(v.get("coeffs"), list):
            raise WireError("diag form needs a coeffs list")
        return _validated(raw_diag(K, [elem_from_json(K, c) for c in v["coeffs"]]))
    if kind == "gram":
        M = v.get("M")
        if not isinstance(M, list) or not all(isinstance(r, list) for r in M):
            raise WireError("gram form needs a matrix M")
        return _validated(raw_gram(K, [[elem_from_json(K, e) for e in row] for row in M]))
    raise WireError(f"unknown form kind {kind!r}")


def _validated(f: QForm) -> QForm:
    try:
        return validate(f)
    except FormError as e:
        raise WireError(str(e)) from None


def class_row(c: SquareClass) -> list:
    x = c.rep
    return [x.a, x.b, c.norm, x.trace(), is_squarefree(x), is_indecomposable(x)]


def canonical_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def class_from_json(K: FieldCtx, v) -> SquareClass:
    x = elem_from_json(K, v)
    if not x.is_totally_positive():
        raise WireError(f"{x} is not totally positive")
    return class_of(x)
