"""Canonical, injective byte encoding of protocol values.

Every value is a one-byte tag followed by its payload. Integers are 16-byte
signed big-endian, strings and byte strings are length-prefixed, dataclass
fields keep their declared order, and maps and sets are sorted by the
canonical bytes of their keys/items. ``decode`` is strict: it accepts only
bytes that ``canonicalize`` could have produced.
"""
import dataclasses
import struct
from enum import Enum
from fractions import Fraction

INT_WIDTH = 16
LEN_WIDTH = 4

TAG_NONE = b"N"
TAG_BOOL = b"B"
TAG_INT = b"I"
TAG_FLOAT = b"D"
TAG_FRACTION = b"Q"
TAG_STR = b"S"
TAG_BYTES = b"Y"
TAG_LIST = b"L"
TAG_MAP = b"M"
TAG_SET = b"U"


def _int_bytes(value):
    try:
        return value.to_bytes(INT_WIDTH, "big", signed=True)
    except OverflowError:
        raise ValueError(f"integer {value} does not fit the canonical width") from None


def _length(n):
    return n.to_bytes(LEN_WIDTH, "big")


def canonicalize(value):
    """
    Encode a protocol value as canonical bytes.

    Args:
        value: None, bool, int, float, Fraction, str, bytes, Enum, dataclass,
            list/tuple, dict, set/frozenset, or any object with ``__canonical__``

    Returns:
        bytes
    """
    out = bytearray()
    _encode(value, out)
    return bytes(out)


def _encode(value, out):
    if hasattr(value, "__canonical__"):
        _encode(value.__canonical__(), out)
    elif value is None:
        out += TAG_NONE
    elif isinstance(value, bool):
        out += TAG_BOOL + (b"\x01" if value else b"\x00")
    elif isinstance(value, Enum):
        _encode(value.value, out)
    elif isinstance(value, int):
        out += TAG_INT + _int_bytes(value)
    elif isinstance(value, float):
        out += TAG_FLOAT + struct.pack(">d", value)
    elif isinstance(value, Fraction):
        out += TAG_FRACTION + _int_bytes(value.numerator) + _int_bytes(value.denominator)
    elif isinstance(value, str):
        data = value.encode("utf-8")
        out += TAG_STR + _length(len(data)) + data
    elif isinstance(value, (bytes, bytearray, memoryview)):
        data = bytes(value)
        out += TAG_BYTES + _length(len(data)) + data
    elif dataclasses.is_dataclass(value) and not isinstance(value, type):
        fields = dataclasses.fields(value)
        out += TAG_LIST + _length(len(fields))
        for f in fields:
            _encode(getattr(value, f.name), out)
    elif isinstance(value, (list, tuple)):
        out += TAG_LIST + _length(len(value))
        for item in value:
            _encode(item, out)
    elif isinstance(value, dict):
        entries = sorted((canonicalize(k), canonicalize(v)) for k, v in value.items())
        out += TAG_MAP + _length(len(entries))
        for key_bytes, value_bytes in entries:
            out += key_bytes + value_bytes
    elif isinstance(value, (set, frozenset)):
        items = sorted(canonicalize(item) for item in value)
        out += TAG_SET + _length(len(items))
        for item_bytes in items:
            out += item_bytes
    else:
        raise TypeError(f"cannot canonicalize {type(value).__name__}")


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise ValueError("truncated canonical value")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def length(self):
        return int.from_bytes(self.take(LEN_WIDTH), "big")

    def integer(self):
        return int.from_bytes(self.take(INT_WIDTH), "big", signed=True)


def decode(data):
    """Strictly decode canonical bytes back into plain Python values."""
    reader = _Reader(bytes(data))
    value = _decode(reader)
    if reader.pos != len(reader.data):
        raise ValueError("trailing bytes after canonical value")
    return value


def _decode(reader):
    tag = reader.take(1)
    if tag == TAG_NONE:
        return None
    if tag == TAG_BOOL:
        flag = reader.take(1)
        if flag not in (b"\x00", b"\x01"):
            raise ValueError("invalid boolean byte")
        return flag == b"\x01"
    if tag == TAG_INT:
        return reader.integer()
    if tag == TAG_FLOAT:
        return struct.unpack(">d", reader.take(8))[0]
    if tag == TAG_FRACTION:
        numerator, denominator = reader.integer(), reader.integer()
        value = Fraction(numerator, denominator)
        if (value.numerator, value.denominator) != (numerator, denominator):
            raise ValueError("non-reduced fraction")
        return value
    if tag == TAG_STR:
        return reader.take(reader.length()).decode("utf-8")
    if tag == TAG_BYTES:
        return reader.take(reader.length())
    if tag == TAG_LIST:
        return [_decode(reader) for _ in range(reader.length())]
    if tag in (TAG_MAP, TAG_SET):
        count = reader.length()
        previous = None
        items = []
        for _ in range(count):
            start = reader.pos
            key = _decode(reader)
            key_bytes = reader.data[start:reader.pos]
            if previous is not None and key_bytes <= previous:
                raise ValueError("map keys or set items out of canonical order")
            previous = key_bytes
            items.append((key, _decode(reader)) if tag == TAG_MAP else key)
        return dict(items) if tag == TAG_MAP else frozenset(items)
    raise ValueError(f"unknown canonical tag {tag!r}")
