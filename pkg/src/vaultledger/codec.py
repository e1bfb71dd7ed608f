"""Canonical byte-encoding primitives.

Every value that is hashed or signed goes through these helpers so that the
same logical value encodes to the same bytes on every platform.  The rules:
integers are fixed-width big-endian, variable-length fields carry a u32
length prefix, optional fields carry a one-byte presence flag.  Because each
field is either fixed-width or length-prefixed, concatenation of fields is
injective: no two distinct field tuples share an encoding.
"""

from __future__ import annotations

import struct

U8_MAX = 0xFF
U32_MAX = 0xFFFF_FFFF
U64_MAX = 0xFFFF_FFFF_FFFF_FFFF

# Protocol amounts, heights, nonces and delays all ride in u64 fields.
MAX_AMOUNT = U64_MAX


class EncodingError(ValueError):
    """A value does not fit the field it is being encoded into."""


def u8(value: int) -> bytes:
    if not 0 <= value <= U8_MAX:
        raise EncodingError(f"u8 out of range: {value}")
    return struct.pack(">B", value)


def u32(value: int) -> bytes:
    if not 0 <= value <= U32_MAX:
        raise EncodingError(f"u32 out of range: {value}")
    return struct.pack(">I", value)


def u64(value: int) -> bytes:
    if not 0 <= value <= U64_MAX:
        raise EncodingError(f"u64 out of range: {value}")
    return struct.pack(">Q", value)


def raw(data: bytes) -> bytes:
    """Length-prefixed byte string."""
    return u32(len(data)) + data


def text(value: str) -> bytes:
    """Length-prefixed UTF-8 string."""
    return raw(value.encode("utf-8"))


def boolean(value: bool) -> bytes:
    return u8(1 if value else 0)


def option(encoded: bytes | None) -> bytes:
    """Presence flag followed by the already-encoded value, if any."""
    if encoded is None:
        return u8(0)
    return u8(1) + encoded


def check_amount(value: int, what: str = "amount") -> int:
    """Reject amounts outside [0, MAX_AMOUNT]; arithmetic never wraps."""
    if not isinstance(value, int) or isinstance(value, bool):
        raise EncodingError(f"{what} must be an integer, got {type(value).__name__}")
    if value < 0:
        raise EncodingError(f"{what} must be non-negative, got {value}")
    if value > MAX_AMOUNT:
        raise EncodingError(f"{what} exceeds maximum encodable value")
    return value
