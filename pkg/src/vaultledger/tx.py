"""Transaction types, canonical encoding, ids and signatures.

A transaction id is a kind prefix joined to the SHA-256 of the canonical
encoding of the unsigned transaction, e.g. ``REVOCABLEPAY-<64 hex>``.  The
prefix names the operation so a payee can recognize a revocable transfer
before accepting it as settled.  Note that vault creation shares the
``ACCOUNTSET`` prefix with key registration: both are account-setup
operations; the one-byte kind tag inside the encoding keeps their ids
distinct.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Union

from . import codec
from .address import Address, AddressError, parse_address
from .keys import KeyPair, get_scheme

TX_ID_RE = re.compile(
    r"^(BASIC|INREVOCABLEPAY|ACCOUNTSET|REVOCABLEPAY|REVOKE|VAULTCLEAR)-([0-9a-f]{64})$"
)

MAX_MEMO_LEN = 256


class TxError(ValueError):
    """Structurally invalid transaction or transaction id."""


class TxKind(Enum):
    # (tag byte, id prefix, wire name)
    BASIC = (0, "BASIC", "basic")
    IRREVOCABLE_PAY = (1, "INREVOCABLEPAY", "irrevocable_pay")
    ACCOUNT_SET = (2, "ACCOUNTSET", "account_set")
    VAULT_CREATE = (3, "ACCOUNTSET", "vault_create")
    REVOCABLE_PAY = (4, "REVOCABLEPAY", "revocable_pay")
    REVOKE = (5, "REVOKE", "revoke")
    VAULT_CLEAR = (6, "VAULTCLEAR", "vault_clear")

    @property
    def tag(self) -> int:
        return self.value[0]

    @property
    def prefix(self) -> str:
        return self.value[1]

    @property
    def wire_name(self) -> str:
        return self.value[2]


_KIND_BY_WIRE = {k.wire_name: k for k in TxKind}


@dataclass(frozen=True, slots=True)
class TxId:
    prefix: str
    digest: str

    @property
    def text(self) -> str:
        return f"{self.prefix}-{self.digest}"

    def __str__(self) -> str:
        return self.text

    @classmethod
    def parse(cls, value: str) -> "TxId":
        m = TX_ID_RE.match(value)
        if not m:
            raise TxError(f"not a valid transaction id: {value!r}")
        return cls(prefix=m.group(1), digest=m.group(2))


# --- payloads ------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class BasicPayload:
    """Genesis issuance: credit `to` out of thin air. Only valid at height 0."""

    to: Address
    amount: int

    def __post_init__(self) -> None:
        codec.check_amount(self.amount)

    def encode(self) -> bytes:
        return self.to.encode() + codec.u64(self.amount)


@dataclass(frozen=True, slots=True)
class IrrevocablePayPayload:
    """Immediate transfer from a standard account."""

    to: Address
    amount: int

    def __post_init__(self) -> None:
        codec.check_amount(self.amount)

    def encode(self) -> bytes:
        return self.to.encode() + codec.u64(self.amount)


@dataclass(frozen=True, slots=True)
class AccountSetPayload:
    """Register the sender's public key, or update account metadata.

    `retrieval`, when present on a vault, must equal the existing binding:
    the retrieval account can never be re-pointed after vault creation.
    """

    pubkey: bytes
    retrieval: Address | None = None
    memo: str | None = None

    def __post_init__(self) -> None:
        if len(self.pubkey) == 0:
            raise TxError("account_set requires a public key")
        if self.memo is not None and len(self.memo) > MAX_MEMO_LEN:
            raise TxError(f"memo longer than {MAX_MEMO_LEN} characters")

    def encode(self) -> bytes:
        return (
            codec.raw(self.pubkey)
            + codec.option(self.retrieval.encode() if self.retrieval else None)
            + codec.option(codec.text(self.memo) if self.memo is not None else None)
        )


@dataclass(frozen=True, slots=True)
class VaultCreatePayload:
    """Fund a new vault account and bind its retrieval account."""

    vault_pubkey: bytes
    retrieval: Address
    amount: int

    def __post_init__(self) -> None:
        if len(self.vault_pubkey) == 0:
            raise TxError("vault_create requires the vault public key")
        codec.check_amount(self.amount)

    def encode(self) -> bytes:
        return codec.raw(self.vault_pubkey) + self.retrieval.encode() + codec.u64(self.amount)


@dataclass(frozen=True, slots=True)
class RevocablePayPayload:
    """Delayed transfer from a vault; credits `to` only after `delay` blocks."""

    to: Address
    amount: int
    delay: int

    def __post_init__(self) -> None:
        codec.check_amount(self.amount)
        codec.check_amount(self.delay, "delay")

    def encode(self) -> bytes:
        return self.to.encode() + codec.u64(self.amount) + codec.u64(self.delay)


@dataclass(frozen=True, slots=True)
class RevokePayload:
    """Cancel one in-flight revocable transfer; funds go to the retrieval account."""

    target: TxId

    def encode(self) -> bytes:
        return codec.text(self.target.text)


@dataclass(frozen=True, slots=True)
class VaultClearPayload:
    """Drop settled transfer records; with close=True, also shut the vault."""

    close: bool = False

    def encode(self) -> bytes:
        return codec.boolean(self.close)


Payload = Union[
    BasicPayload,
    IrrevocablePayPayload,
    AccountSetPayload,
    VaultCreatePayload,
    RevocablePayPayload,
    RevokePayload,
    VaultClearPayload,
]

_PAYLOAD_TYPES: dict[TxKind, type] = {
    TxKind.BASIC: BasicPayload,
    TxKind.IRREVOCABLE_PAY: IrrevocablePayPayload,
    TxKind.ACCOUNT_SET: AccountSetPayload,
    TxKind.VAULT_CREATE: VaultCreatePayload,
    TxKind.REVOCABLE_PAY: RevocablePayPayload,
    TxKind.REVOKE: RevokePayload,
    TxKind.VAULT_CLEAR: VaultClearPayload,
}


@dataclass(frozen=True, slots=True)
class Transaction:
    kind: TxKind
    sender: Address
    nonce: int
    payload: Payload
    signature: bytes = b""

    def __post_init__(self) -> None:
        if not isinstance(self.payload, _PAYLOAD_TYPES[self.kind]):
            raise TxError(
                f"{self.kind.wire_name} transaction carries "
                f"{type(self.payload).__name__}"
            )
        codec.check_amount(self.nonce, "nonce")


def canonical_encode(tx: Transaction) -> bytes:
    """Deterministic, injective byte form of the unsigned transaction.

    Fields in schema order: kind tag, sender, nonce, payload.  See the
    encoding table in the README for exact widths.
    """
    return (
        codec.u8(tx.kind.tag)
        + tx.sender.encode()
        + codec.u64(tx.nonce)
        + tx.payload.encode()
    )


def tx_id(tx: Transaction) -> TxId:
    digest = hashlib.sha256(canonical_encode(tx)).hexdigest()
    return TxId(prefix=tx.kind.prefix, digest=digest)


def sign_transaction(tx: Transaction, keypair: KeyPair) -> Transaction:
    scheme = get_scheme(keypair.scheme)
    return replace(tx, signature=scheme.sign(keypair.private, canonical_encode(tx)))


def verify_signature(tx: Transaction, pubkey: bytes, scheme_name: str) -> bool:
    """True iff tx.signature validates over the canonical encoding."""
    if not tx.signature:
        return False
    return get_scheme(scheme_name).verify(pubkey, canonical_encode(tx), tx.signature)


# --- wire (JSON) form -----------------------------------------------------

def payload_to_dict(payload: Payload) -> dict[str, Any]:
    if isinstance(payload, (BasicPayload, IrrevocablePayPayload)):
        return {"to": payload.to.text, "amount": payload.amount}
    if isinstance(payload, AccountSetPayload):
        return {
            "pubkey": payload.pubkey.hex(),
            "retrieval": payload.retrieval.text if payload.retrieval else None,
            "memo": payload.memo,
        }
    if isinstance(payload, VaultCreatePayload):
        return {
            "vault_pubkey": payload.vault_pubkey.hex(),
            "retrieval": payload.retrieval.text,
            "amount": payload.amount,
        }
    if isinstance(payload, RevocablePayPayload):
        return {"to": payload.to.text, "amount": payload.amount, "delay": payload.delay}
    if isinstance(payload, RevokePayload):
        return {"target": payload.target.text}
    if isinstance(payload, VaultClearPayload):
        return {"close": payload.close}
    raise TxError(f"unknown payload type {type(payload).__name__}")


def _payload_from_dict(kind: TxKind, d: dict[str, Any]) -> Payload:
    if kind in (TxKind.BASIC, TxKind.IRREVOCABLE_PAY):
        cls = BasicPayload if kind is TxKind.BASIC else IrrevocablePayPayload
        return cls(to=parse_address(d["to"]), amount=int(d["amount"]))
    if kind is TxKind.ACCOUNT_SET:
        retrieval = d.get("retrieval")
        return AccountSetPayload(
            pubkey=bytes.fromhex(d["pubkey"]),
            retrieval=parse_address(retrieval) if retrieval else None,
            memo=d.get("memo"),
        )
    if kind is TxKind.VAULT_CREATE:
        return VaultCreatePayload(
            vault_pubkey=bytes.fromhex(d["vault_pubkey"]),
            retrieval=parse_address(d["retrieval"]),
            amount=int(d["amount"]),
        )
    if kind is TxKind.REVOCABLE_PAY:
        return RevocablePayPayload(
            to=parse_address(d["to"]), amount=int(d["amount"]), delay=int(d["delay"])
        )
    if kind is TxKind.REVOKE:
        return RevokePayload(target=TxId.parse(d["target"]))
    if kind is TxKind.VAULT_CLEAR:
        return VaultClearPayload(close=bool(d["close"]))
    raise TxError(f"unknown transaction kind {kind!r}")


def tx_to_dict(tx: Transaction) -> dict[str, Any]:
    return {
        "kind": tx.kind.wire_name,
        "from": tx.sender.text,
        "nonce": tx.nonce,
        "payload": payload_to_dict(tx.payload),
        "signature": tx.signature.hex(),
        "id": tx_id(tx).text,
    }


def tx_from_dict(d: dict[str, Any]) -> Transaction:
    """Parse the wire form; recomputes and checks the embedded id."""
    try:
        kind = _KIND_BY_WIRE[d["kind"]]
        tx = Transaction(
            kind=kind,
            sender=parse_address(d["from"]),
            nonce=int(d["nonce"]),
            payload=_payload_from_dict(kind, d["payload"]),
            signature=bytes.fromhex(d.get("signature", "")),
        )
    except (KeyError, TypeError, AttributeError, AddressError, ValueError) as exc:
        raise TxError(f"malformed transaction record: {exc}") from exc
    claimed = d.get("id")
    if claimed is not None and claimed != tx_id(tx).text:
        raise TxError(f"transaction id mismatch: {claimed}")
    return tx
