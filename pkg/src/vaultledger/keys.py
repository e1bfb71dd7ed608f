"""Signature schemes and key pairs.

The chain is parameterized over one scheme.  Ed25519 is the default; the
"null" scheme replaces signatures with a plain hash so unit tests can mint
deterministic keys and forge at will.  Signatures always cover the canonical
encoding of the unsigned transaction.
"""

from __future__ import annotations

import hashlib
import hmac
import os
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric import ed25519


class KeyError_(ValueError):
    """Malformed key material or unknown scheme."""


@dataclass(frozen=True, slots=True)
class KeyPair:
    scheme: str
    private: bytes
    public: bytes


class Ed25519Scheme:
    """Deterministic Ed25519 signatures (same key + message, same bytes)."""

    name = "ed25519"
    signature_len = 64

    def generate(self) -> KeyPair:
        return self.from_seed(os.urandom(32))

    def from_seed(self, seed: bytes) -> KeyPair:
        material = hashlib.sha256(b"ed25519-seed:" + seed).digest()
        priv = ed25519.Ed25519PrivateKey.from_private_bytes(material)
        pub = priv.public_key().public_bytes(
            serialization.Encoding.Raw, serialization.PublicFormat.Raw
        )
        return KeyPair(scheme=self.name, private=material, public=pub)

    def sign(self, private: bytes, message: bytes) -> bytes:
        if len(private) != 32:
            raise KeyError_("ed25519 private key must be 32 bytes")
        return ed25519.Ed25519PrivateKey.from_private_bytes(private).sign(message)

    def verify(self, public: bytes, message: bytes, signature: bytes) -> bool:
        if len(public) != 32 or len(signature) != 64:
            return False
        try:
            ed25519.Ed25519PublicKey.from_public_bytes(public).verify(signature, message)
            return True
        except (InvalidSignature, ValueError):
            return False


class NullScheme:
    """Trivially forgeable stand-in: signature = SHA-256(pubkey || message).

    Anyone who knows the public key can produce a valid signature, which is
    exactly what deterministic tests want.  Never use outside tests.
    """

    name = "null"
    signature_len = 32

    def generate(self) -> KeyPair:
        return self.from_seed(os.urandom(32))

    def from_seed(self, seed: bytes) -> KeyPair:
        pub = hashlib.sha256(b"null-key:" + seed).digest()
        return KeyPair(scheme=self.name, private=pub, public=pub)

    def sign(self, private: bytes, message: bytes) -> bytes:
        return hashlib.sha256(b"null-sig:" + private + message).digest()

    def verify(self, public: bytes, message: bytes, signature: bytes) -> bool:
        expected = hashlib.sha256(b"null-sig:" + public + message).digest()
        return hmac.compare_digest(expected, signature)


_SCHEMES = {
    Ed25519Scheme.name: Ed25519Scheme(),
    NullScheme.name: NullScheme(),
}


def get_scheme(name: str) -> Ed25519Scheme | NullScheme:
    try:
        return _SCHEMES[name]
    except KeyError:
        raise KeyError_(f"unknown signature scheme: {name!r}") from None


def scheme_names() -> tuple[str, ...]:
    return tuple(_SCHEMES)
