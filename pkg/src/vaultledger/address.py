"""Account addresses: a type prefix plus a 20-byte public-key digest.

The prefix makes the account type visible in the address text itself, so a
payer can tell at a glance whether funds move to a standard account or to a
vault.  Both address forms of one key share the same 20-byte body and differ
only in the prefix.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from enum import Enum

BODY_LEN = 20

_ADDRESS_RE = re.compile(r"^(std|vlt)([0-9a-f]{40})$")


class AddressError(ValueError):
    """Malformed address text or public key."""


class AccountKind(Enum):
    STANDARD = "std"
    VAULT = "vlt"

    @property
    def prefix(self) -> str:
        return self.value

    @property
    def tag(self) -> int:
        """Single-byte tag used in canonical encodings."""
        return 0 if self is AccountKind.STANDARD else 1


@dataclass(frozen=True, slots=True)
class Address:
    kind: AccountKind
    body: bytes

    def __post_init__(self) -> None:
        if len(self.body) != BODY_LEN:
            raise AddressError(f"address body must be {BODY_LEN} bytes, got {len(self.body)}")

    @property
    def text(self) -> str:
        return self.kind.prefix + self.body.hex()

    def encode(self) -> bytes:
        """Canonical 21-byte form: kind tag + raw body."""
        return bytes([self.kind.tag]) + self.body

    def __str__(self) -> str:
        return self.text


def derive_address(pubkey: bytes, kind: AccountKind) -> Address:
    """Address for a public key: first 20 bytes of its SHA-256 digest.

    The same key yields both a standard and a vault address; only the
    prefix differs.
    """
    if not isinstance(pubkey, (bytes, bytearray)) or len(pubkey) == 0:
        raise AddressError("public key must be a non-empty byte string")
    body = hashlib.sha256(bytes(pubkey)).digest()[:BODY_LEN]
    return Address(kind=kind, body=body)


def parse_address(value: str) -> Address:
    """Inverse of Address.text; rejects anything but the two known prefixes."""
    m = _ADDRESS_RE.match(value)
    if not m:
        raise AddressError(f"not a valid address: {value!r}")
    kind = AccountKind.STANDARD if m.group(1) == "std" else AccountKind.VAULT
    return Address(kind=kind, body=bytes.fromhex(m.group(2)))
