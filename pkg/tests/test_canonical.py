from fractions import Fraction

import pytest

from src.protocol.canonical import canonicalize, decode
from src.protocol.journal import JournalParams


def test_deterministic():
    value = {"a": [1, 2, "x"], "b": {b"k": None}}
    assert canonicalize(value) == canonicalize(value)


def test_map_order_independent():
    assert canonicalize({"b": 1, "a": 2}) == canonicalize({"a": 2, "b": 1})


def test_params_differing_in_f_j():
    a = JournalParams(f_j=Fraction(1, 5))
    b = JournalParams(f_j=Fraction(1, 4))
    assert canonicalize(a) != canonicalize(b)


def test_type_tags_keep_values_apart():
    encoded = {canonicalize(v) for v in (1, True, "1", b"1", 1.0, Fraction(1), [1], None)}
    assert len(encoded) == 8


def test_decode_inverts_plain_values():
    value = {"n": -5, "s": "héllo", "b": b"\x00\x01", "l": [True, None, Fraction(2, 3)], "f": 0.25}
    assert decode(canonicalize(value)) == value
    assert decode(canonicalize({1, 2, 3})) == frozenset({1, 2, 3})


@pytest.mark.parametrize("data", [
    b"",
    b"Z",
    canonicalize(5) + b"\x00",
    canonicalize("abc")[:-1],
    b"B\x02",
])
def test_decode_rejects_noncanonical(data):
    with pytest.raises(ValueError):
        decode(data)


def test_decode_rejects_unsorted_map():
    a, b = canonicalize("a"), canonicalize("b")
    one = canonicalize(1)
    unsorted = b"M" + (2).to_bytes(4, "big") + b + one + a + one
    with pytest.raises(ValueError):
        decode(unsorted)


def test_rejects_unknown_types():
    with pytest.raises(TypeError):
        canonicalize(object())
