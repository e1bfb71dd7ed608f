"""Ledger state machine: validation and application of every transaction kind.

States are immutable snapshots.  Every apply_* function returns a new
LedgerState and leaves its input untouched, so a single writer can advance
the chain while readers hold older snapshots.

The central design point is deduct-at-issuance: a revocable payment debits
the vault the moment it is included, parking the funds in a pending record
on the vault.  The destination is credited only when the record matures;
a revoke before maturity redirects the parked funds to the vault's bound
retrieval account instead.  At no point can the same funds be promised
twice, and a pending record settles exactly once (matured or revoked,
never both).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

from . import codec
from .address import AccountKind, Address, derive_address, parse_address
from .keys import get_scheme
from .tx import Transaction, TxId, TxKind, canonical_encode, tx_id

DEFAULT_THETA_MAX = 10_000


class RejectReason(str, Enum):
    """Stable reason codes surfaced in receipts and through the CLI."""

    BAD_SIGNATURE = "bad-signature"
    BAD_NONCE = "bad-nonce"
    UNKNOWN_ACCOUNT = "unknown-account"
    WRONG_ACCOUNT_KIND = "wrong-account-kind"
    INSUFFICIENT_SPENDABLE = "insufficient-spendable"
    UNKNOWN_TARGET_TX = "unknown-target-tx"
    REVOKE_WINDOW_EXPIRED = "revoke-window-expired"
    VAULT_FROZEN = "vault-frozen"
    SELF_RETRIEVAL = "self-retrieval"
    DUPLICATE_ADDRESS = "duplicate-address"
    # Operation-specific conditions beyond the core ten:
    THETA_OUT_OF_RANGE = "theta-out-of-range"
    TARGET_NOT_PENDING = "target-not-pending"
    RETRIEVAL_REBIND = "retrieval-rebind"
    CLOSE_WITH_PENDING = "close-with-pending"
    VAULT_CLOSED = "vault-closed"
    PUBKEY_MISMATCH = "pubkey-mismatch"
    MALFORMED = "malformed"

    def __str__(self) -> str:
        return self.value


class EngineError(Exception):
    """A state transition violated its preconditions."""

    def __init__(self, reason: RejectReason, detail: str = ""):
        self.reason = reason
        super().__init__(f"{reason.value}{': ' + detail if detail else ''}")


class PendingStatus(str, Enum):
    PENDING = "pending"
    MATURED = "matured"
    REVOKED = "revoked"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True, slots=True)
class PendingTransfer:
    """One in-flight revocable transfer, recorded on the sending vault."""

    source_tx: str
    amount: int
    dest: Address
    init_height: int
    maturity_height: int
    status: PendingStatus = PendingStatus.PENDING

    def __post_init__(self) -> None:
        if self.maturity_height <= self.init_height:
            raise EngineError(
                RejectReason.THETA_OUT_OF_RANGE,
                "maturity height must exceed initiation height",
            )

    def settle(self, status: PendingStatus) -> "PendingTransfer":
        """Move to a terminal status; terminal records never change again."""
        if self.status is not PendingStatus.PENDING:
            raise EngineError(
                RejectReason.TARGET_NOT_PENDING,
                f"{self.source_tx} already {self.status.value}",
            )
        if status is PendingStatus.PENDING:
            raise ValueError("cannot settle to pending")
        return replace(self, status=status)


@dataclass(frozen=True, slots=True)
class Account:
    address: Address
    pubkey: bytes | None = None
    nonce: int = 0
    spendable: int = 0
    # Vault-only fields; standard accounts leave them at the defaults.
    retrieval: Address | None = None
    clear_height: int = 0
    pending: tuple[PendingTransfer, ...] = ()
    frozen: bool = False
    closed: bool = False
    memo: str | None = None

    @property
    def kind(self) -> AccountKind:
        return self.address.kind

    @property
    def is_vault(self) -> bool:
        return self.kind is AccountKind.VAULT

    def live_pending(self) -> int:
        """Total value parked in not-yet-settled outgoing transfers."""
        return sum(p.amount for p in self.pending if p.status is PendingStatus.PENDING)


@dataclass(frozen=True, slots=True)
class LedgerState:
    """Full world state after some block height.

    accounts and pending_index are treated as frozen: apply functions copy
    them before changing anything.  pending_index maps a revocable-pay tx id
    to the text address of the vault whose pending list holds it.
    """

    accounts: dict[str, Account] = field(default_factory=dict)
    height: int = 0
    pending_index: dict[str, str] = field(default_factory=dict)
    issuance: int = 0
    theta_max: int = DEFAULT_THETA_MAX
    scheme: str = "ed25519"

    def account(self, addr: Address | str) -> Account | None:
        key = addr if isinstance(addr, str) else addr.text
        return self.accounts.get(key)

    def require_account(self, addr: Address | str) -> Account:
        acct = self.account(addr)
        if acct is None:
            raise EngineError(RejectReason.UNKNOWN_ACCOUNT, str(addr))
        return acct


def total_value(state: LedgerState) -> int:
    """Spendable plus live pending over all accounts; constant across blocks."""
    return sum(a.spendable + a.live_pending() for a in state.accounts.values())


@dataclass(frozen=True, slots=True)
class BalanceDetail:
    source_tx: str
    amount: int
    counterparty: str
    init_height: int
    maturity_height: int


@dataclass(frozen=True, slots=True)
class BalanceReport:
    """Spendable funds split from in-flight revocable value (both directions)."""

    address: str
    spendable: int
    pending_out: int
    pending_in: int
    outgoing: tuple[BalanceDetail, ...]
    incoming: tuple[BalanceDetail, ...]


# --- state helpers --------------------------------------------------------

def _put(state: LedgerState, *accounts: Account, **extra) -> LedgerState:
    new = dict(state.accounts)
    for acct in accounts:
        new[acct.address.text] = acct
    return replace(state, accounts=new, **extra)


def _debit(acct: Account, amount: int) -> Account:
    if acct.spendable < amount:
        raise EngineError(
            RejectReason.INSUFFICIENT_SPENDABLE,
            f"{acct.address.text} holds {acct.spendable}, needs {amount}",
        )
    return replace(acct, spendable=acct.spendable - amount)


def _credit(acct: Account, amount: int) -> Account:
    codec.check_amount(acct.spendable + amount)
    return replace(acct, spendable=acct.spendable + amount)


# --- kind-specific checks (shared by validate() and the apply ops) --------

def _check_sender(
    state: LedgerState, sender: Address, kind: AccountKind
) -> RejectReason | None:
    acct = state.account(sender)
    if acct is None:
        return RejectReason.UNKNOWN_ACCOUNT
    if acct.closed:
        return RejectReason.VAULT_CLOSED
    if sender.kind is not kind:
        return RejectReason.WRONG_ACCOUNT_KIND
    return None


def _check_irrevocable_pay(
    state: LedgerState, sender: Address, to: Address, amount: int
) -> RejectReason | None:
    if (r := _check_sender(state, sender, AccountKind.STANDARD)) is not None:
        return r
    if state.account(to) is None:
        return RejectReason.UNKNOWN_ACCOUNT
    if state.accounts[sender.text].spendable < amount:
        return RejectReason.INSUFFICIENT_SPENDABLE
    return None


def _check_vault_create(
    state: LedgerState, sender: Address, vault_pubkey: bytes, retrieval: Address, amount: int
) -> RejectReason | None:
    if (r := _check_sender(state, sender, AccountKind.STANDARD)) is not None:
        return r
    vault_addr = derive_address(vault_pubkey, AccountKind.VAULT)
    if state.account(vault_addr) is not None:
        return RejectReason.DUPLICATE_ADDRESS
    if retrieval.text == vault_addr.text:
        return RejectReason.SELF_RETRIEVAL
    if state.account(retrieval) is None:
        return RejectReason.UNKNOWN_ACCOUNT
    if state.accounts[sender.text].spendable < amount:
        return RejectReason.INSUFFICIENT_SPENDABLE
    return None


def _check_revocable_pay(
    state: LedgerState, sender: Address, to: Address, amount: int, delay: int
) -> RejectReason | None:
    if (r := _check_sender(state, sender, AccountKind.VAULT)) is not None:
        return r
    vault = state.accounts[sender.text]
    if vault.frozen:
        return RejectReason.VAULT_FROZEN
    if not 1 <= delay <= state.theta_max:
        return RejectReason.THETA_OUT_OF_RANGE
    if state.account(to) is None:
        return RejectReason.UNKNOWN_ACCOUNT
    if vault.spendable < amount:
        return RejectReason.INSUFFICIENT_SPENDABLE
    return None


def _check_revoke(
    state: LedgerState, sender: Address, target: TxId, height: int
) -> RejectReason | None:
    if (r := _check_sender(state, sender, AccountKind.VAULT)) is not None:
        return r
    owner = state.pending_index.get(target.text)
    if owner != sender.text:
        return RejectReason.UNKNOWN_TARGET_TX
    entry = _find_pending(state.accounts[owner], target.text)
    if entry is None:
        return RejectReason.UNKNOWN_TARGET_TX
    if entry.status is PendingStatus.MATURED:
        return RejectReason.REVOKE_WINDOW_EXPIRED
    if entry.status is PendingStatus.REVOKED:
        return RejectReason.TARGET_NOT_PENDING
    if height >= entry.maturity_height:
        return RejectReason.REVOKE_WINDOW_EXPIRED
    return None


def _check_vault_clear(
    state: LedgerState, sender: Address, close: bool
) -> RejectReason | None:
    if (r := _check_sender(state, sender, AccountKind.VAULT)) is not None:
        return r
    vault = state.accounts[sender.text]
    if close and any(p.status is PendingStatus.PENDING for p in vault.pending):
        return RejectReason.CLOSE_WITH_PENDING
    return None


def _check_account_set(
    state: LedgerState,
    sender: Address,
    pubkey: bytes,
    retrieval: Address | None,
    memo: str | None,
) -> RejectReason | None:
    if derive_address(pubkey, sender.kind).text != sender.text:
        return RejectReason.PUBKEY_MISMATCH
    acct = state.account(sender)
    if acct is None:
        # Registration may create a fresh standard account; vaults only come
        # into being through vault_create (they need a retrieval binding).
        if sender.kind is not AccountKind.STANDARD:
            return RejectReason.UNKNOWN_ACCOUNT
    else:
        if acct.closed:
            return RejectReason.VAULT_CLOSED
        if acct.pubkey is not None and acct.pubkey != pubkey:
            return RejectReason.PUBKEY_MISMATCH
    if retrieval is not None:
        if sender.kind is not AccountKind.VAULT:
            return RejectReason.MALFORMED
        if acct is None or acct.retrieval is None or retrieval.text != acct.retrieval.text:
            return RejectReason.RETRIEVAL_REBIND
    return None


def _find_pending(vault: Account, txid: str) -> PendingTransfer | None:
    for entry in vault.pending:
        if entry.source_tx == txid:
            return entry
    return None


def _raise_if(reason: RejectReason | None) -> None:
    if reason is not None:
        raise EngineError(reason)


# --- apply operations -----------------------------------------------------

def apply_irrevocable_pay(
    state: LedgerState, sender: Address, to: Address, amount: int
) -> LedgerState:
    """Immediate standard-account transfer; effective at the inclusion height."""
    codec.check_amount(amount)
    _raise_if(_check_irrevocable_pay(state, sender, to, amount))
    src = _debit(state.accounts[sender.text], amount)
    if to.text == sender.text:
        return _put(state, _credit(src, amount))
    dst = _credit(state.accounts[to.text], amount)
    return _put(state, src, dst)


def apply_vault_create(
    state: LedgerState,
    sender: Address,
    vault_pubkey: bytes,
    retrieval: Address,
    amount: int,
) -> LedgerState:
    """Create and fund a vault; immediate, not itself revocable."""
    codec.check_amount(amount)
    _raise_if(_check_vault_create(state, sender, vault_pubkey, retrieval, amount))
    src = _debit(state.accounts[sender.text], amount)
    vault = Account(
        address=derive_address(vault_pubkey, AccountKind.VAULT),
        pubkey=vault_pubkey,
        spendable=amount,
        retrieval=retrieval,
    )
    return _put(state, src, vault)


def apply_revocable_pay(
    state: LedgerState,
    sender: Address,
    to: Address,
    amount: int,
    delay: int,
    source_tx: str,
) -> LedgerState:
    """Deduct-at-issuance: debit the vault now, credit the destination at
    init_height + delay unless revoked first."""
    codec.check_amount(amount)
    _raise_if(_check_revocable_pay(state, sender, to, amount, delay))
    vault = _debit(state.accounts[sender.text], amount)
    entry = PendingTransfer(
        source_tx=source_tx,
        amount=amount,
        dest=to,
        init_height=state.height,
        maturity_height=state.height + delay,
    )
    vault = replace(vault, pending=vault.pending + (entry,))
    index = dict(state.pending_index)
    index[source_tx] = sender.text
    return _put(state, vault, pending_index=index)


def apply_revoke(state: LedgerState, sender: Address, target: TxId) -> LedgerState:
    """Cancel a pending transfer before maturity.

    The parked funds move to the vault's retrieval account, never back to
    the vault and never to the original destination.  The vault is frozen
    afterwards: a revoke signals a compromised or disputed key, so further
    revocable payments from it are refused (earlier in-flight transfers
    still need their own revoke each).
    """
    _raise_if(_check_revoke(state, sender, target, state.height))
    vault = state.accounts[sender.text]
    entry = _find_pending(vault, target.text)
    assert entry is not None and vault.retrieval is not None
    settled = entry.settle(PendingStatus.REVOKED)
    pending = tuple(settled if p.source_tx == target.text else p for p in vault.pending)
    vault = replace(vault, pending=pending, frozen=True)
    if vault.retrieval.text == sender.text:
        # Cannot occur: self-retrieval is rejected at creation.
        raise EngineError(RejectReason.SELF_RETRIEVAL)
    retrieval = _credit(state.accounts[vault.retrieval.text], entry.amount)
    return _put(state, vault, retrieval)


def mature_pending(state: LedgerState, height: int) -> LedgerState:
    """Settle every pending transfer whose maturity has arrived.

    Runs once at the start of each block, before any transaction in it, so
    a revoke landing in the maturity block is already too late.  Idempotent
    at a given height: settled records are terminal.
    """
    if height < state.height:
        raise ValueError(f"cannot mature at height {height} < {state.height}")
    credits: dict[str, int] = {}
    updated: dict[str, Account] = {}
    for addr_text in sorted(state.accounts):
        acct = state.accounts[addr_text]
        if not acct.pending:
            continue
        changed = False
        new_pending = []
        for entry in acct.pending:
            if entry.status is PendingStatus.PENDING and entry.maturity_height <= height:
                new_pending.append(entry.settle(PendingStatus.MATURED))
                credits[entry.dest.text] = credits.get(entry.dest.text, 0) + entry.amount
                changed = True
            else:
                new_pending.append(entry)
        if changed:
            updated[addr_text] = replace(acct, pending=tuple(new_pending))
    if not credits and height == state.height:
        return state
    accounts = dict(state.accounts)
    accounts.update(updated)
    for dest_text, amount in credits.items():
        accounts[dest_text] = _credit(accounts[dest_text], amount)
    return replace(state, accounts=accounts, height=height)


def apply_vault_clear(state: LedgerState, sender: Address, close: bool = False) -> LedgerState:
    """Drop settled records and stamp the clear height; optionally close.

    Closing requires an empty in-flight set, sweeps the whole spendable
    balance to the retrieval account, and makes the vault reject every
    future transaction.
    """
    _raise_if(_check_vault_clear(state, sender, close))
    vault = state.accounts[sender.text]
    kept = tuple(p for p in vault.pending if p.status is PendingStatus.PENDING)
    index = state.pending_index
    dropped = [p.source_tx for p in vault.pending if p.status is not PendingStatus.PENDING]
    if dropped:
        index = {k: v for k, v in state.pending_index.items() if k not in dropped}
    vault = replace(vault, pending=kept, clear_height=state.height)
    if not close:
        return _put(state, vault, pending_index=index)
    assert vault.retrieval is not None
    swept = vault.spendable
    vault = replace(vault, spendable=0, closed=True)
    if swept and vault.retrieval.text != sender.text:
        retrieval = _credit(state.accounts[vault.retrieval.text], swept)
        return _put(state, vault, retrieval, pending_index=index)
    return _put(state, vault, pending_index=index)


def apply_account_set(
    state: LedgerState,
    sender: Address,
    pubkey: bytes,
    retrieval: Address | None = None,
    memo: str | None = None,
) -> LedgerState:
    """Register the sender's public key or update its metadata.

    The retrieval binding is write-once at vault creation; any attempt to
    point it elsewhere is rejected, otherwise a key thief could redirect
    revoked funds to an account they control.
    """
    _raise_if(_check_account_set(state, sender, pubkey, retrieval, memo))
    acct = state.account(sender)
    if acct is None:
        acct = Account(address=sender, pubkey=pubkey)
    else:
        acct = replace(acct, pubkey=pubkey)
    if memo is not None:
        acct = replace(acct, memo=memo)
    return _put(state, acct)


def apply_genesis_issuance(state: LedgerState, to: Address, amount: int) -> LedgerState:
    """Credit an allocation at height 0; the only way value enters the system."""
    codec.check_amount(amount)
    if state.height != 0:
        raise EngineError(RejectReason.MALFORMED, "issuance only at genesis")
    acct = state.account(to) or Account(address=to)
    acct = _credit(acct, amount)
    return _put(state, acct, issuance=state.issuance + amount)


# --- transaction-level validation and application --------------------------

def _resolve_pubkey(state: LedgerState, tx: Transaction) -> bytes | None:
    acct = state.account(tx.sender)
    if acct is not None and acct.pubkey is not None:
        return acct.pubkey
    if tx.kind is TxKind.ACCOUNT_SET:
        return tx.payload.pubkey
    return None


def validate(tx: Transaction, state: LedgerState, height: int) -> RejectReason | None:
    """Full stateful check of one transaction at `height`; pure.

    Returns None when the transaction would apply cleanly, otherwise the
    first reason it must be rejected.  Order: kind admissibility, sender
    resolution, signature, nonce, then kind-specific preconditions.
    """
    if tx.kind is TxKind.BASIC:
        return RejectReason.MALFORMED  # issuance exists only in the genesis block
    acct = state.account(tx.sender)
    creating = acct is None and tx.kind is TxKind.ACCOUNT_SET
    if acct is None and not creating:
        return RejectReason.UNKNOWN_ACCOUNT
    if acct is not None and acct.closed:
        return RejectReason.VAULT_CLOSED
    pubkey = _resolve_pubkey(state, tx)
    if pubkey is None:
        return RejectReason.BAD_SIGNATURE
    if not tx.signature or not get_scheme(state.scheme).verify(
        pubkey, canonical_encode(tx), tx.signature
    ):
        return RejectReason.BAD_SIGNATURE
    expected_nonce = acct.nonce if acct is not None else 0
    if tx.nonce != expected_nonce:
        return RejectReason.BAD_NONCE

    p = tx.payload
    if tx.kind is TxKind.IRREVOCABLE_PAY:
        return _check_irrevocable_pay(state, tx.sender, p.to, p.amount)
    if tx.kind is TxKind.ACCOUNT_SET:
        return _check_account_set(state, tx.sender, p.pubkey, p.retrieval, p.memo)
    if tx.kind is TxKind.VAULT_CREATE:
        return _check_vault_create(state, tx.sender, p.vault_pubkey, p.retrieval, p.amount)
    if tx.kind is TxKind.REVOCABLE_PAY:
        return _check_revocable_pay(state, tx.sender, p.to, p.amount, p.delay)
    if tx.kind is TxKind.REVOKE:
        return _check_revoke(state, tx.sender, p.target, height)
    if tx.kind is TxKind.VAULT_CLEAR:
        return _check_vault_clear(state, tx.sender, p.close)
    return RejectReason.MALFORMED


def apply_transaction(state: LedgerState, tx: Transaction) -> LedgerState:
    """Validate at the state's current height, then apply; raises EngineError.

    Advances the sender's nonce alongside the kind-specific effect.
    """
    reason = validate(tx, state, state.height)
    if reason is not None:
        raise EngineError(reason, tx_id(tx).text)
    return apply_validated(state, tx)


def apply_validated(state: LedgerState, tx: Transaction) -> LedgerState:
    """Apply a transaction that the caller has already run validate() on."""
    p = tx.payload
    if tx.kind is TxKind.IRREVOCABLE_PAY:
        state = apply_irrevocable_pay(state, tx.sender, p.to, p.amount)
    elif tx.kind is TxKind.ACCOUNT_SET:
        state = apply_account_set(state, tx.sender, p.pubkey, p.retrieval, p.memo)
    elif tx.kind is TxKind.VAULT_CREATE:
        state = apply_vault_create(state, tx.sender, p.vault_pubkey, p.retrieval, p.amount)
    elif tx.kind is TxKind.REVOCABLE_PAY:
        state = apply_revocable_pay(state, tx.sender, p.to, p.amount, p.delay, tx_id(tx).text)
    elif tx.kind is TxKind.REVOKE:
        state = apply_revoke(state, tx.sender, p.target)
    elif tx.kind is TxKind.VAULT_CLEAR:
        state = apply_vault_clear(state, tx.sender, p.close)
    else:  # pragma: no cover - validate() already excluded BASIC
        raise EngineError(RejectReason.MALFORMED)
    sender = state.accounts[tx.sender.text]
    return _put(state, replace(sender, nonce=sender.nonce + 1))


def balance_query(state: LedgerState, addr: Address | str) -> BalanceReport:
    """Split an account's position into settled and in-flight value.

    spendable + pending_out is everything the account still owns; pending_in
    lists inbound revocable transfers with their maturity heights so a payee
    can see exactly what is conditional and until when.
    """
    if isinstance(addr, str):
        addr = parse_address(addr)
    acct = state.require_account(addr)
    outgoing = tuple(
        BalanceDetail(p.source_tx, p.amount, p.dest.text, p.init_height, p.maturity_height)
        for p in acct.pending
        if p.status is PendingStatus.PENDING
    )
    incoming = []
    for source_text in sorted(state.accounts):
        source = state.accounts[source_text]
        for p in source.pending:
            if p.status is PendingStatus.PENDING and p.dest.text == addr.text:
                incoming.append(
                    BalanceDetail(
                        p.source_tx, p.amount, source_text, p.init_height, p.maturity_height
                    )
                )
    return BalanceReport(
        address=addr.text,
        spendable=acct.spendable,
        pending_out=sum(d.amount for d in outgoing),
        pending_in=sum(d.amount for d in incoming),
        outgoing=outgoing,
        incoming=tuple(incoming),
    )
