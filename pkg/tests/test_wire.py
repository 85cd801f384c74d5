import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from critset.forms import diag_form, gram_form
from critset.ring import QQ, make_field
from critset.wire import (
    WireError,
    canonical_dumps,
    class_from_json,
    class_row,
    elem_from_json,
    elem_to_json,
    field_from_json,
    field_to_json,
    form_from_json,
    form_to_json,
    int_in,
    int_out,
    parse_shorthand,
)

K5 = make_field(5)


@pytest.mark.parametrize("s,ab", [
    ("3", (3, 0)), ("-2*w", (0, -2)), ("3+2*w", (3, 2)), ("1-w", (1, -1)),
    ("w", (0, 1)), ("-w", (0, -1)), ("-4+w", (-4, 1)), ("7w", (0, 7)), (" 2 + 3w ", (2, 3)),
])
def test_shorthand(s, ab):
    assert parse_shorthand(s) == ab


@pytest.mark.parametrize("s", ["", "x", "3+", "w2", "2**w", "1.5", "3+2*"])
def test_shorthand_rejects(s):
    with pytest.raises(WireError):
        parse_shorthand(s)


def test_big_integers_become_strings():
    n = 2**70
    assert int_out(n) == str(n) and int_out(-(2**63)) == -(2**63) and int_out(2**63) == str(2**63)
    assert int_in(str(n)) == n and int_in(5) == 5
    with pytest.raises(WireError):
        int_in(True)
    with pytest.raises(WireError):
        int_in("12a")


@settings(max_examples=100)
@given(st.integers(-(2**80), 2**80), st.integers(-(2**80), 2**80))
def test_element_roundtrip(a, b):
    x = K5.elem(a, b)
    d = json.loads(json.dumps(elem_to_json(x)))
    assert elem_from_json(K5, d) == x


def test_element_inputs():
    assert elem_from_json(K5, 4) == K5.elem(4)
    assert elem_from_json(K5, '{"a": 1, "b": 2}') == K5.elem(1, 2)
    assert elem_from_json(K5, {"a": "3"}) == K5.elem(3)
    with pytest.raises(WireError):
        elem_from_json(QQ, "1+w")
    with pytest.raises(WireError):
        elem_from_json(K5, {"a": 1, "c": 2})
    with pytest.raises(WireError):
        elem_from_json(K5, "{bad")
    with pytest.raises(WireError):
        class_from_json(K5, "-1")


def test_field_roundtrip():
    for K in (QQ, K5, make_field(2)):
        assert field_from_json(field_to_json(K)) == K


def test_form_roundtrip():
    f = diag_form(K5, [1, K5.elem(2, 1)])
    g = gram_form(K5, [[K5.elem(2), K5.elem(1)], [K5.elem(1), K5.elem(2)]])
    for h in (f, g):
        assert form_from_json(json.loads(json.dumps(form_to_json(h)))) == h
    assert form_from_json("diag:1,2+w", K5) == f
    assert form_to_json(g)["classical"] is False


def test_form_inputs_rejected():
    with pytest.raises(WireError, match="not positive"):
        form_from_json("diag:1,-1", QQ)
    with pytest.raises(WireError):
        form_from_json('{"kind": "diag", "coeffs": [1]}')  # no field
    with pytest.raises(WireError):
        form_from_json({"kind": "diag", "coeffs": [1], "field": {"type": "Q"}}, K5)
    with pytest.raises(WireError):
        form_from_json({"kind": "weird"}, QQ)
    with pytest.raises(WireError):
        form_from_json({"kind": "gram", "M": [[1, 3], [3, 1]]}, QQ)


def test_class_row():
    c = class_from_json(K5, "2+w")
    assert class_row(c) == [2, 1, 5, 5, True, False]


def test_canonical_dumps_sorted_and_newline():
    s = canonical_dumps({"b": 1, "a": [1, 2]})
    assert s.endswith("\n") and s.index('"a"') < s.index('"b"')
