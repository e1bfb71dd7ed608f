"""Deterministic single-proposer chain: height clock, mempool, block log.

There is no consensus here on purpose: one process produces blocks from a
FIFO mempool, so every run of the same workload yields a byte-identical
ledger file.  Blocks live in an append-only log of one JSON record per
line; each record carries the SHA-256 of the previous line and the digest
of the world state after the block, which lets `replay` verify the whole
history from genesis.

Invalid transactions are not dropped: they are recorded in the block with
a rejection receipt and have no state effect.  In a system whose point is
fraud recovery, failed revoke attempts are evidence worth keeping.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Iterable, Iterator

from . import codec
from .address import Address, parse_address
from .engine import (
    Account,
    LedgerState,
    PendingStatus,
    RejectReason,
    apply_genesis_issuance,
    apply_validated,
    mature_pending,
    validate,
)
from .keys import get_scheme
from .tx import BasicPayload, Transaction, TxError, TxKind, tx_from_dict, tx_id, tx_to_dict

RECORD_VERSION = 1
GENESIS_PARENT = "0" * 64

STATUS_TAGS = {
    PendingStatus.PENDING: 0,
    PendingStatus.MATURED: 1,
    PendingStatus.REVOKED: 2,
}


class ChainError(Exception):
    pass


class ReplayError(ChainError):
    """Ledger log fails verification; `height` is the first bad block."""

    def __init__(self, height: int, detail: str):
        self.height = height
        super().__init__(f"replay failed at height {height}: {detail}")


class MempoolError(ChainError):
    def __init__(self, code: str, detail: str = ""):
        self.code = code
        super().__init__(f"{code}{': ' + detail if detail else ''}")


@dataclass(frozen=True, slots=True)
class GenesisConfig:
    chain_id: str
    allocations: tuple[tuple[Address, int], ...]
    theta_max: int = 10_000
    scheme: str = "ed25519"

    def __post_init__(self) -> None:
        if not self.chain_id:
            raise ChainError("chain id must be non-empty")
        if self.theta_max < 1:
            raise ChainError("theta_max must be at least 1")
        get_scheme(self.scheme)
        seen = set()
        for addr, amount in self.allocations:
            try:
                codec.check_amount(amount)
            except codec.EncodingError as exc:
                raise ChainError(str(exc)) from exc
            if addr.text in seen:
                raise ChainError(f"duplicate genesis allocation: {addr.text}")
            seen.add(addr.text)

    def to_dict(self) -> dict[str, Any]:
        return {
            "chain_id": self.chain_id,
            "theta_max": self.theta_max,
            "scheme": self.scheme,
            "allocations": [
                {"address": a.text, "amount": amt} for a, amt in self.allocations
            ],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "GenesisConfig":
        try:
            return cls(
                chain_id=d["chain_id"],
                theta_max=int(d.get("theta_max", 10_000)),
                scheme=d.get("scheme", "ed25519"),
                allocations=tuple(
                    (parse_address(a["address"]), int(a["amount"]))
                    for a in d["allocations"]
                ),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ChainError(f"bad genesis config: {exc}") from exc


@dataclass(frozen=True, slots=True)
class Receipt:
    status: str  # "applied" | "rejected"
    reason: str | None = None

    @classmethod
    def applied(cls) -> "Receipt":
        return cls(status="applied")

    @classmethod
    def rejected(cls, reason: RejectReason) -> "Receipt":
        return cls(status="rejected", reason=reason.value)

    def to_dict(self) -> dict[str, Any]:
        if self.status == "applied":
            return {"status": "applied"}
        return {"status": "rejected", "reason": self.reason}


@dataclass(frozen=True, slots=True)
class Block:
    height: int
    parent: str
    entries: tuple[tuple[Transaction, Receipt], ...]
    state_digest: str

    def to_record(self, genesis: GenesisConfig | None = None) -> dict[str, Any]:
        record: dict[str, Any] = {
            "v": RECORD_VERSION,
            "height": self.height,
            "parent": self.parent,
            "txs": [
                {"tx": tx_to_dict(tx), "receipt": r.to_dict()} for tx, r in self.entries
            ],
            "state": self.state_digest,
        }
        if genesis is not None:
            record["chain_id"] = genesis.chain_id
            record["params"] = {"theta_max": genesis.theta_max, "scheme": genesis.scheme}
        return record


def encode_record(record: dict[str, Any]) -> bytes:
    """Canonical one-line JSON used for the ledger log and parent hashing."""
    return json.dumps(record, sort_keys=True, separators=(",", ":")).encode("utf-8")


def state_hash(state: LedgerState) -> bytes:
    """32-byte digest over the account table.

    Accounts are serialized in address order with their pending lists in
    record order, so two states holding the same accounts hash identically
    no matter how they were built.  The chain height is deliberately not
    included: producing an empty block with no maturities leaves the digest
    unchanged.
    """
    h = hashlib.sha256()
    h.update(codec.u32(len(state.accounts)))
    for addr_text in sorted(state.accounts):
        h.update(_encode_account(state.accounts[addr_text]))
    return h.digest()


@lru_cache(maxsize=65536)
def _encode_account(acct: Account) -> bytes:
    # Accounts are frozen, so the digest of an unchanged account is reused
    # across blocks instead of being re-encoded.
    parts = [
        acct.address.encode(),
        codec.option(codec.raw(acct.pubkey) if acct.pubkey is not None else None),
        codec.u64(acct.nonce),
        codec.u64(acct.spendable),
        codec.option(acct.retrieval.encode() if acct.retrieval else None),
        codec.u64(acct.clear_height),
        codec.u32(len(acct.pending)),
    ]
    for p in acct.pending:
        parts.append(codec.text(p.source_tx))
        parts.append(codec.u64(p.amount))
        parts.append(p.dest.encode())
        parts.append(codec.u64(p.init_height))
        parts.append(codec.u64(p.maturity_height))
        parts.append(codec.u8(STATUS_TAGS[p.status]))
    parts.append(codec.boolean(acct.frozen))
    parts.append(codec.boolean(acct.closed))
    parts.append(codec.option(codec.text(acct.memo) if acct.memo is not None else None))
    return b"".join(parts)


def build_genesis(config: GenesisConfig) -> tuple[LedgerState, Block]:
    """Genesis block at height 0: one issuance transaction per allocation."""
    state = LedgerState(theta_max=config.theta_max, scheme=config.scheme)
    entries = []
    for addr, amount in config.allocations:
        tx = Transaction(
            kind=TxKind.BASIC,
            sender=addr,
            nonce=0,
            payload=BasicPayload(to=addr, amount=amount),
        )
        state = apply_genesis_issuance(state, addr, amount)
        entries.append((tx, Receipt.applied()))
    block = Block(
        height=0,
        parent=GENESIS_PARENT,
        entries=tuple(entries),
        state_digest=state_hash(state).hex(),
    )
    return state, block


class Mempool:
    """FIFO queue of signed transactions, deduplicated by transaction id.

    Safe for concurrent submitters; the single block producer drains it.
    """

    def __init__(self) -> None:
        self._queue: list[Transaction] = []
        self._ids: set[str] = set()
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._queue)

    def __iter__(self) -> Iterator[Transaction]:
        with self._lock:
            return iter(list(self._queue))

    def submit(self, tx: Transaction) -> str:
        """Stateless admission: well-formed, signed, not issuance, not seen.

        Stateful validation happens at block production, against the state
        each transaction actually executes in.  Returns the transaction id.
        """
        if tx.kind is TxKind.BASIC:
            raise MempoolError("malformed", "issuance transactions only exist at genesis")
        if not tx.signature:
            raise MempoolError("malformed", "transaction is unsigned")
        txid = tx_id(tx).text
        with self._lock:
            if txid in self._ids:
                raise MempoolError("duplicate-txid", txid)
            self._queue.append(tx)
            self._ids.add(txid)
        return txid

    def submit_record(self, record: dict[str, Any]) -> str:
        try:
            tx = tx_from_dict(record)
        except TxError as exc:
            raise MempoolError("malformed", str(exc)) from exc
        return self.submit(tx)

    def drain(self) -> list[Transaction]:
        with self._lock:
            txs, self._queue, self._ids = self._queue, [], set()
        return txs


@dataclass
class Chain:
    """A chain instance: current state plus the block log.

    When `path` is set, every produced block is appended to the file as it
    is created; the in-memory block list is authoritative either way.
    """

    config: GenesisConfig
    state: LedgerState
    blocks: list[Block] = field(default_factory=list)
    mempool: Mempool = field(default_factory=Mempool)
    path: Path | None = None
    _last_line: bytes = b""

    @classmethod
    def create(cls, config: GenesisConfig, path: Path | str | None = None) -> "Chain":
        state, genesis = build_genesis(config)
        chain = cls(config=config, state=state, path=Path(path) if path else None)
        line = encode_record(genesis.to_record(genesis=config))
        chain.blocks.append(genesis)
        chain._last_line = line
        if chain.path is not None:
            chain.path.write_bytes(line + b"\n")
        return chain

    @classmethod
    def open(cls, path: Path | str) -> "Chain":
        config, state, blocks, last_line = replay(Path(path))
        return cls(
            config=config, state=state, blocks=blocks, path=Path(path), _last_line=last_line
        )

    @property
    def height(self) -> int:
        return self.state.height

    def submit(self, tx: Transaction) -> str:
        return self.mempool.submit(tx)

    def produce_block(self) -> Block:
        """Advance the height by one: mature pending transfers, then drain
        the mempool in FIFO order against the evolving state."""
        height = self.state.height + 1
        state = mature_pending(self.state, height)
        entries: list[tuple[Transaction, Receipt]] = []
        for tx in self.mempool.drain():
            reason = validate(tx, state, height)
            if reason is None:
                state = apply_validated(state, tx)
                entries.append((tx, Receipt.applied()))
            else:
                entries.append((tx, Receipt.rejected(reason)))
        parent = hashlib.sha256(self._last_line).hexdigest()
        block = Block(
            height=height,
            parent=parent,
            entries=tuple(entries),
            state_digest=state_hash(state).hex(),
        )
        line = encode_record(block.to_record())
        self.state = state
        self.blocks.append(block)
        self._last_line = line
        if self.path is not None:
            with self.path.open("ab") as fh:
                fh.write(line + b"\n")
        return block

    def produce_blocks(self, count: int) -> list[Block]:
        return [self.produce_block() for _ in range(count)]

    def find_tx(self, txid: str) -> tuple[int, Transaction, Receipt] | None:
        for block in self.blocks:
            for tx, receipt in block.entries:
                if tx_id(tx).text == txid:
                    return block.height, tx, receipt
        return None


def _parse_block_record(record: dict[str, Any], height: int) -> Block:
    try:
        entries = tuple(
            (
                tx_from_dict(e["tx"]),
                Receipt(status=e["receipt"]["status"], reason=e["receipt"].get("reason")),
            )
            for e in record["txs"]
        )
        return Block(
            height=int(record["height"]),
            parent=record["parent"],
            entries=entries,
            state_digest=record["state"],
        )
    except (KeyError, TypeError, TxError, ValueError) as exc:
        raise ReplayError(height, f"corrupt block record: {exc}") from exc


def replay(
    source: Path | Iterable[bytes],
) -> tuple[GenesisConfig, LedgerState, list[Block], bytes]:
    """Re-execute a block log from genesis, verifying every stored digest.

    Each block's parent must hash-link to the previous record, every receipt
    must match what validation says today, and the recomputed state digest
    must equal the stored one.  Fails loudly at the first divergence.
    """
    if isinstance(source, Path):
        lines: Iterable[bytes] = source.read_bytes().splitlines()
    else:
        lines = source

    config: GenesisConfig | None = None
    state: LedgerState | None = None
    blocks: list[Block] = []
    last_line = b""
    expected_height = 0

    for raw_line in lines:
        raw_line = raw_line.strip()
        if not raw_line:
            continue
        try:
            record = json.loads(raw_line)
        except json.JSONDecodeError as exc:
            raise ReplayError(expected_height, f"unparseable record: {exc}") from exc
        block = _parse_block_record(record, expected_height)
        if block.height != expected_height:
            raise ReplayError(expected_height, f"height jump to {block.height}")

        if expected_height == 0:
            if "chain_id" not in record or "params" not in record:
                raise ReplayError(0, "genesis record lacks chain parameters")
            allocations = []
            for tx, receipt in block.entries:
                if tx.kind is not TxKind.BASIC or receipt.status != "applied":
                    raise ReplayError(0, "genesis block may hold only applied issuance")
                allocations.append((tx.payload.to, tx.payload.amount))
            config = GenesisConfig(
                chain_id=record["chain_id"],
                theta_max=int(record["params"]["theta_max"]),
                scheme=record["params"]["scheme"],
                allocations=tuple(allocations),
            )
            state, _ = build_genesis(config)
            if block.parent != GENESIS_PARENT:
                raise ReplayError(0, "genesis parent digest must be all zeros")
        else:
            assert config is not None and state is not None
            expected_parent = hashlib.sha256(last_line).hexdigest()
            if block.parent != expected_parent:
                raise ReplayError(block.height, "parent digest mismatch")
            state = mature_pending(state, block.height)
            for tx, receipt in block.entries:
                reason = validate(tx, state, block.height)
                if receipt.status == "applied":
                    if reason is not None:
                        raise ReplayError(
                            block.height,
                            f"recorded-applied transaction now rejects: {reason.value}",
                        )
                    state = apply_validated(state, tx)
                else:
                    if reason is None:
                        raise ReplayError(
                            block.height, "recorded-rejected transaction now applies"
                        )
                    if receipt.reason != reason.value:
                        raise ReplayError(
                            block.height,
                            f"receipt reason {receipt.reason} != {reason.value}",
                        )

        if block.state_digest != state_hash(state).hex():
            raise ReplayError(block.height, "state digest mismatch")
        blocks.append(block)
        last_line = raw_line
        expected_height += 1

    if config is None or state is None:
        raise ReplayError(0, "empty ledger log")
    return config, state, blocks, last_line


def replay_or_genesis(
    path: Path, fallback: GenesisConfig
) -> tuple[GenesisConfig, LedgerState, list[Block], bytes]:
    """Replay the log; an absent or empty file means genesis-only state."""
    if not path.exists() or path.stat().st_size == 0:
        state, genesis = build_genesis(fallback)
        line = encode_record(genesis.to_record(genesis=fallback))
        return fallback, state, [genesis], line
    return replay(path)
