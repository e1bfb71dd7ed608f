"""Command-line surface over a local chain directory.

A chain home holds the genesis config, the append-only block log, the
queued-transaction file and a keystore.  Every mutating command takes an
exclusive lock on the home; queries replay the log and never write.

Exit codes: 0 success, 1 rejected transaction or failed expectation
(reason on stderr), 2 usage error, 3 integrity failure.
"""

from __future__ import annotations

import argparse
import base64
import dataclasses
import getpass
import json
import os
import shlex
import sys
from contextlib import contextmanager
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any

from cryptography.fernet import Fernet, InvalidToken
from cryptography.hazmat.primitives.hashes import SHA256
from cryptography.hazmat.primitives.kdf.pbkdf2 import PBKDF2HMAC
from filelock import FileLock, Timeout

from . import codec
from .address import AccountKind, Address, AddressError, derive_address, parse_address
from .chain import (
    Chain,
    ChainError,
    GenesisConfig,
    MempoolError,
    ReplayError,
    replay_or_genesis,
    state_hash,
)
from .engine import (
    EngineError,
    LedgerState,
    apply_validated,
    balance_query,
    mature_pending,
    validate,
)
from .keys import KeyError_, KeyPair, get_scheme
from .security import (
    AttackParams,
    SecurityError,
    cascade_breach_probability,
    catch_up_probability,
    exact_decimal,
    simulate_attack,
)
from .tx import (
    AccountSetPayload,
    IrrevocablePayPayload,
    RevocablePayPayload,
    RevokePayload,
    Transaction,
    TxError,
    TxId,
    TxKind,
    VaultClearPayload,
    VaultCreatePayload,
    sign_transaction,
    tx_id,
    tx_to_dict,
)

EXIT_OK = 0
EXIT_REJECTED = 1
EXIT_USAGE = 2
EXIT_INTEGRITY = 3

GENESIS_FILE = "genesis.json"
LEDGER_FILE = "ledger.log"
MEMPOOL_FILE = "mempool.jsonl"
KEYS_DIR = "keys"

_PBKDF2_ITERATIONS = 300_000
_HELD_LOCKS: set[str] = set()
_SCENARIO_DEPTH_LIMIT = 8


class CliFailure(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        self.message = message
        super().__init__(message)


def _fail(code: int, message: str) -> CliFailure:
    return CliFailure(code, message)


# --- keystore ---------------------------------------------------------------

@dataclass(frozen=True)
class StoredKey:
    name: str
    scheme: str
    public: bytes
    secret: dict[str, Any]

    def std_address(self) -> Address:
        return derive_address(self.public, AccountKind.STANDARD)

    def vault_address(self) -> Address:
        return derive_address(self.public, AccountKind.VAULT)


def _keys_dir(home: Path) -> Path:
    return home / KEYS_DIR


def _key_path(home: Path, name: str) -> Path:
    if not name or "/" in name or name.startswith("."):
        raise _fail(EXIT_USAGE, f"invalid key name: {name!r}")
    return _keys_dir(home) / f"{name}.json"


def _kdf(passphrase: str, salt: bytes) -> Fernet:
    kdf = PBKDF2HMAC(algorithm=SHA256(), length=32, salt=salt, iterations=_PBKDF2_ITERATIONS)
    return Fernet(base64.urlsafe_b64encode(kdf.derive(passphrase.encode("utf-8"))))


def save_key(home: Path, name: str, keypair: KeyPair, passphrase: str | None) -> StoredKey:
    """Write a key file; plaintext when passphrase is None (--insecure)."""
    if passphrase is None:
        secret: dict[str, Any] = {"mode": "plain", "private": keypair.private.hex()}
    else:
        salt = os.urandom(16)
        token = _kdf(passphrase, salt).encrypt(keypair.private)
        secret = {"mode": "fernet", "salt": salt.hex(), "token": token.decode("ascii")}
    entry = StoredKey(name=name, scheme=keypair.scheme, public=keypair.public, secret=secret)
    path = _key_path(home, name)
    if path.exists():
        raise _fail(EXIT_USAGE, f"key {name!r} already exists")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(
            {
                "name": name,
                "scheme": entry.scheme,
                "public": entry.public.hex(),
                "secret": entry.secret,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    return entry


def load_key(home: Path, name: str) -> StoredKey:
    path = _key_path(home, name)
    if not path.exists():
        raise _fail(EXIT_USAGE, f"no such key: {name!r}")
    d = json.loads(path.read_text())
    return StoredKey(
        name=d["name"], scheme=d["scheme"], public=bytes.fromhex(d["public"]), secret=d["secret"]
    )


def list_keys(home: Path) -> list[StoredKey]:
    directory = _keys_dir(home)
    if not directory.exists():
        return []
    return [load_key(home, p.stem) for p in sorted(directory.glob("*.json"))]


def unlock_key(entry: StoredKey, passphrase: str | None) -> KeyPair:
    secret = entry.secret
    if secret["mode"] == "plain":
        return KeyPair(scheme=entry.scheme, private=bytes.fromhex(secret["private"]), public=entry.public)
    if passphrase is None:
        passphrase = os.environ.get("VAULTLEDGER_PASSPHRASE")
    if passphrase is None:
        passphrase = getpass.getpass(f"passphrase for key {entry.name!r}: ")
    try:
        private = _kdf(passphrase, bytes.fromhex(secret["salt"])).decrypt(
            secret["token"].encode("ascii")
        )
    except InvalidToken:
        raise _fail(EXIT_USAGE, f"wrong passphrase for key {entry.name!r}") from None
    return KeyPair(scheme=entry.scheme, private=private, public=entry.public)


# --- home / chain plumbing ---------------------------------------------------

@contextmanager
def home_lock(home: Path):
    """Exclusive lock on the chain home; reentrant within this process."""
    home.mkdir(parents=True, exist_ok=True)
    key = str((home / ".lock").resolve())
    if key in _HELD_LOCKS:
        yield
        return
    lock = FileLock(key)
    try:
        lock.acquire(timeout=10)
    except Timeout:
        raise _fail(EXIT_USAGE, f"chain home {home} is locked by another process") from None
    _HELD_LOCKS.add(key)
    try:
        yield
    finally:
        _HELD_LOCKS.discard(key)
        lock.release()


def _genesis_path(home: Path) -> Path:
    return home / GENESIS_FILE


def _ledger_path(home: Path) -> Path:
    return home / LEDGER_FILE


def _mempool_path(home: Path) -> Path:
    return home / MEMPOOL_FILE


def load_genesis_config(home: Path) -> GenesisConfig:
    path = _genesis_path(home)
    if not path.exists():
        raise _fail(EXIT_USAGE, f"{home} is not an initialized chain home (run init)")
    try:
        return GenesisConfig.from_dict(json.loads(path.read_text()))
    except (json.JSONDecodeError, ChainError) as exc:
        raise _fail(EXIT_INTEGRITY, f"bad genesis config: {exc}") from exc


def load_chain(home: Path) -> Chain:
    """Replay the block log (verifying digests) and load queued transactions."""
    genesis = load_genesis_config(home)
    try:
        config, state, blocks, last_line = replay_or_genesis(_ledger_path(home), genesis)
    except ReplayError as exc:
        raise _fail(EXIT_INTEGRITY, str(exc)) from exc
    if config.chain_id != genesis.chain_id:
        raise _fail(
            EXIT_INTEGRITY,
            f"ledger chain id {config.chain_id!r} does not match genesis "
            f"{genesis.chain_id!r}",
        )
    chain = Chain(
        config=config,
        state=state,
        blocks=blocks,
        path=_ledger_path(home),
        _last_line=last_line,
    )
    mp_path = _mempool_path(home)
    if mp_path.exists():
        for line in mp_path.read_text().splitlines():
            if line.strip():
                chain.mempool.submit_record(json.loads(line))
    return chain


def _append_mempool(home: Path, tx: Transaction) -> None:
    with _mempool_path(home).open("a") as fh:
        fh.write(json.dumps(tx_to_dict(tx), sort_keys=True, separators=(",", ":")) + "\n")


def _clear_mempool(home: Path) -> None:
    path = _mempool_path(home)
    if path.exists():
        path.write_text("")


def resolve_address(home: Path, spec: str) -> Address:
    """Accept a literal address or `keyname:std` / `keyname:vlt` sugar."""
    try:
        return parse_address(spec)
    except AddressError:
        pass
    if ":" in spec:
        name, _, kind_text = spec.rpartition(":")
        if kind_text in ("std", "vlt"):
            entry = load_key(home, name)
            kind = AccountKind.STANDARD if kind_text == "std" else AccountKind.VAULT
            return derive_address(entry.public, kind)
    raise _fail(EXIT_USAGE, f"cannot resolve address {spec!r}")


def find_key_for(home: Path, addr: Address, scheme: str) -> StoredKey:
    for entry in list_keys(home):
        if entry.scheme == scheme and derive_address(entry.public, addr.kind).text == addr.text:
            return entry
    raise _fail(EXIT_USAGE, f"keystore holds no {scheme} key for {addr.text}")


def projected_state(chain: Chain) -> LedgerState:
    """State the next block would execute in: maturation plus queued txs."""
    height = chain.state.height + 1
    state = mature_pending(chain.state, height)
    for tx in chain.mempool:
        if validate(tx, state, height) is None:
            state = apply_validated(state, tx)
    return state


# --- output helpers ----------------------------------------------------------

def _emit(args: argparse.Namespace, data: dict[str, Any], human: str) -> None:
    if args.json:
        print(json.dumps(data, sort_keys=True))
    else:
        print(human)


def _boolish(value: str) -> bool:
    lowered = value.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {value!r}")


# --- command implementations ---------------------------------------------------

def cmd_init(args: argparse.Namespace) -> int:
    home: Path = args.home
    with home_lock(home):
        if _genesis_path(home).exists() or _ledger_path(home).exists():
            raise _fail(EXIT_USAGE, f"chain home {home} is already initialized")
        if args.genesis:
            try:
                config = GenesisConfig.from_dict(json.loads(Path(args.genesis).read_text()))
            except (OSError, json.JSONDecodeError, ChainError) as exc:
                raise _fail(EXIT_USAGE, f"cannot load genesis file: {exc}") from exc
        else:
            if not args.chain_id:
                raise _fail(EXIT_USAGE, "init needs --genesis FILE or --chain-id")
            allocations = []
            for spec in args.alloc or []:
                addr_spec, sep, amount_text = spec.rpartition("=")
                if not sep:
                    raise _fail(EXIT_USAGE, f"--alloc must look like ADDR=AMOUNT, got {spec!r}")
                try:
                    amount = int(amount_text)
                except ValueError:
                    raise _fail(EXIT_USAGE, f"bad allocation amount in {spec!r}") from None
                allocations.append((resolve_address(home, addr_spec), amount))
            try:
                config = GenesisConfig(
                    chain_id=args.chain_id,
                    theta_max=args.theta_max,
                    scheme=args.scheme,
                    allocations=tuple(allocations),
                )
            except ChainError as exc:
                raise _fail(EXIT_USAGE, str(exc)) from exc
        _genesis_path(home).write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
        chain = Chain.create(config, path=_ledger_path(home))
        _emit(
            args,
            {
                "chain_id": config.chain_id,
                "height": 0,
                "state": chain.blocks[0].state_digest,
                "issuance": chain.state.issuance,
            },
            f"initialized chain {config.chain_id!r} at {home}\n"
            f"genesis digest: {chain.blocks[0].state_digest}",
        )
    return EXIT_OK


def cmd_keys_gen(args: argparse.Namespace) -> int:
    home: Path = args.home
    with home_lock(home):
        scheme_name = args.scheme
        if scheme_name is None:
            scheme_name = (
                load_genesis_config(home).scheme if _genesis_path(home).exists() else "ed25519"
            )
        scheme = get_scheme(scheme_name)
        if args.seed is not None:
            keypair = scheme.from_seed(args.seed.encode("utf-8"))
        else:
            keypair = scheme.generate()
        passphrase = None if args.insecure else args.passphrase
        if not args.insecure and passphrase is None:
            passphrase = os.environ.get("VAULTLEDGER_PASSPHRASE")
        if not args.insecure and passphrase is None:
            passphrase = getpass.getpass(f"passphrase for new key {args.name!r}: ")
        entry = save_key(home, args.name, keypair, passphrase)
    _emit(
        args,
        {
            "name": entry.name,
            "scheme": entry.scheme,
            "std": entry.std_address().text,
            "vlt": entry.vault_address().text,
        },
        f"key {entry.name!r} ({entry.scheme})\n"
        f"  standard address: {entry.std_address().text}\n"
        f"  vault address:    {entry.vault_address().text}",
    )
    return EXIT_OK


def cmd_keys_list(args: argparse.Namespace) -> int:
    entries = list_keys(args.home)
    _emit(
        args,
        {
            "keys": [
                {"name": e.name, "scheme": e.scheme, "std": e.std_address().text,
                 "vlt": e.vault_address().text}
                for e in entries
            ]
        },
        "\n".join(f"{e.name}\t{e.scheme}\t{e.std_address().text}\t{e.vault_address().text}"
                  for e in entries) or "(no keys)",
    )
    return EXIT_OK


def _submit_tx(args: argparse.Namespace, build) -> int:
    """Shared tail of every tx subcommand: sign, pre-validate, queue."""
    home: Path = args.home
    with home_lock(home):
        chain = load_chain(home)
        sender = resolve_address(home, getattr(args, "from"))
        entry = find_key_for(home, sender, chain.config.scheme)
        keypair = unlock_key(entry, getattr(args, "passphrase", None))
        state = projected_state(chain)
        acct = state.account(sender)
        nonce = acct.nonce if acct is not None else 0
        kind, payload = build(chain, state, sender, entry)
        tx = sign_transaction(
            Transaction(kind=kind, sender=sender, nonce=nonce, payload=payload), keypair
        )
        height = chain.state.height + 1
        reason = validate(tx, state, height)
        if reason is not None:
            raise _fail(EXIT_REJECTED, reason.value)
        try:
            chain.mempool.submit(tx)
        except MempoolError as exc:
            raise _fail(EXIT_REJECTED, exc.code) from exc
        _append_mempool(home, tx)
        txid = tx_id(tx).text
    _emit(
        args,
        {"id": txid, "from": sender.text, "nonce": nonce},
        f"queued {txid}",
    )
    return EXIT_OK


def cmd_tx_pay(args: argparse.Namespace) -> int:
    def build(chain, state, sender, entry):
        to = resolve_address(args.home, args.to)
        return TxKind.IRREVOCABLE_PAY, IrrevocablePayPayload(to=to, amount=args.amount)

    return _submit_tx(args, build)


def cmd_tx_account_set(args: argparse.Namespace) -> int:
    def build(chain, state, sender, entry):
        retrieval = resolve_address(args.home, args.retrieval) if args.retrieval else None
        return TxKind.ACCOUNT_SET, AccountSetPayload(
            pubkey=entry.public, retrieval=retrieval, memo=args.memo
        )

    return _submit_tx(args, build)


def cmd_tx_vault_create(args: argparse.Namespace) -> int:
    def build(chain, state, sender, entry):
        vault_key = load_key(args.home, args.vault_key) if args.vault_key else entry
        retrieval = resolve_address(args.home, args.retrieval)
        return TxKind.VAULT_CREATE, VaultCreatePayload(
            vault_pubkey=vault_key.public, retrieval=retrieval, amount=args.amount
        )

    return _submit_tx(args, build)


def cmd_tx_revocable_pay(args: argparse.Namespace) -> int:
    def build(chain, state, sender, entry):
        to = resolve_address(args.home, args.to)
        return TxKind.REVOCABLE_PAY, RevocablePayPayload(
            to=to, amount=args.amount, delay=args.delay
        )

    return _submit_tx(args, build)


def cmd_tx_revoke(args: argparse.Namespace) -> int:
    def build(chain, state, sender, entry):
        if args.target == "latest":
            acct = state.account(sender)
            if acct is None or not acct.pending:
                raise _fail(EXIT_REJECTED, "unknown-target-tx")
            target = TxId.parse(acct.pending[-1].source_tx)
        else:
            try:
                target = TxId.parse(args.target)
            except TxError as exc:
                raise _fail(EXIT_USAGE, str(exc)) from exc
        return TxKind.REVOKE, RevokePayload(target=target)

    return _submit_tx(args, build)


def cmd_tx_vault_clear(args: argparse.Namespace) -> int:
    def build(chain, state, sender, entry):
        return TxKind.VAULT_CLEAR, VaultClearPayload(close=args.close)

    return _submit_tx(args, build)


def cmd_block_produce(args: argparse.Namespace) -> int:
    home: Path = args.home
    if args.count < 1:
        raise _fail(EXIT_USAGE, "--count must be at least 1")
    with home_lock(home):
        chain = load_chain(home)
        produced = []
        for _ in range(args.count):
            produced.append(chain.produce_block())
        _clear_mempool(home)
    lines = []
    for block in produced:
        lines.append(f"block {block.height}  state {block.state_digest}")
        for tx, receipt in block.entries:
            mark = "applied " if receipt.status == "applied" else f"rejected({receipt.reason})"
            lines.append(f"  {mark} {tx_id(tx).text}")
    _emit(
        args,
        {
            "blocks": [
                {
                    "height": b.height,
                    "state": b.state_digest,
                    "txs": [
                        {"id": tx_id(tx).text, **r.to_dict()} for tx, r in b.entries
                    ],
                }
                for b in produced
            ]
        },
        "\n".join(lines),
    )
    return EXIT_OK


def cmd_query_balance(args: argparse.Namespace) -> int:
    chain = load_chain(args.home)
    addr = resolve_address(args.home, args.address)
    try:
        report = balance_query(chain.state, addr)
    except EngineError as exc:
        raise _fail(EXIT_REJECTED, exc.reason.value) from exc
    detail = lambda d: f"    {d.source_tx}  {d.amount} <-> {d.counterparty}  matures at {d.maturity_height}"
    lines = [
        f"address: {report.address}",
        f"spendable: {report.spendable}",
        f"pending_out: {report.pending_out} ({len(report.outgoing)} transfers)",
        *[detail(d) for d in report.outgoing],
        f"pending_in: {report.pending_in} ({len(report.incoming)} transfers)",
        *[detail(d) for d in report.incoming],
    ]
    _emit(
        args,
        {
            "address": report.address,
            "spendable": report.spendable,
            "pending_out": report.pending_out,
            "pending_in": report.pending_in,
            "outgoing": [dataclasses.asdict(d) for d in report.outgoing],
            "incoming": [dataclasses.asdict(d) for d in report.incoming],
        },
        "\n".join(lines),
    )
    return EXIT_OK


def cmd_query_account(args: argparse.Namespace) -> int:
    chain = load_chain(args.home)
    addr = resolve_address(args.home, args.address)
    acct = chain.state.account(addr)
    if acct is None:
        raise _fail(EXIT_REJECTED, "unknown-account")
    data = {
        "address": acct.address.text,
        "kind": acct.kind.prefix,
        "pubkey": acct.pubkey.hex() if acct.pubkey else None,
        "nonce": acct.nonce,
        "spendable": acct.spendable,
        "memo": acct.memo,
    }
    if acct.is_vault:
        data.update(
            {
                "retrieval": acct.retrieval.text if acct.retrieval else None,
                "clear_height": acct.clear_height,
                "frozen": acct.frozen,
                "closed": acct.closed,
                "pending": [
                    {
                        "source_tx": p.source_tx,
                        "amount": p.amount,
                        "dest": p.dest.text,
                        "init_height": p.init_height,
                        "maturity_height": p.maturity_height,
                        "status": p.status.value,
                    }
                    for p in acct.pending
                ],
            }
        )
    human = "\n".join(f"{k}: {v}" for k, v in data.items() if k != "pending")
    if acct.is_vault and acct.pending:
        human += "\npending records:"
        for p in acct.pending:
            human += (
                f"\n  {p.source_tx}  {p.amount} -> {p.dest.text}"
                f"  [{p.status.value}] init {p.init_height} matures {p.maturity_height}"
            )
    _emit(args, data, human)
    return EXIT_OK


def cmd_query_tx(args: argparse.Namespace) -> int:
    chain = load_chain(args.home)
    try:
        txid = TxId.parse(args.txid)
    except TxError as exc:
        raise _fail(EXIT_USAGE, str(exc)) from exc
    found = chain.find_tx(txid.text)
    if found is None:
        queued = any(tx_id(tx).text == txid.text for tx in chain.mempool)
        if queued:
            _emit(args, {"id": txid.text, "status": "queued"}, f"{txid.text}: queued")
            return EXIT_OK
        raise _fail(EXIT_REJECTED, f"transaction not found: {txid.text}")
    height, tx, receipt = found
    status: str | None = None
    if tx.kind is TxKind.REVOCABLE_PAY and receipt.status == "applied":
        owner = chain.state.pending_index.get(txid.text)
        status = "cleared"
        if owner is not None:
            acct = chain.state.accounts[owner]
            for p in acct.pending:
                if p.source_tx == txid.text:
                    status = p.status.value
    data = {
        "id": txid.text,
        "height": height,
        "receipt": receipt.to_dict(),
        "tx": tx_to_dict(tx),
    }
    if status is not None:
        data["pending_status"] = status
    human = f"{txid.text}\n  block: {height}\n  receipt: {receipt.status}"
    if receipt.reason:
        human += f" ({receipt.reason})"
    if status is not None:
        human += f"\n  transfer status: {status}"
    _emit(args, data, human)
    return EXIT_OK


def cmd_replay(args: argparse.Namespace) -> int:
    home: Path = args.home
    genesis = load_genesis_config(home)
    try:
        config, state, blocks, _ = replay_or_genesis(_ledger_path(home), genesis)
    except ReplayError as exc:
        raise _fail(EXIT_INTEGRITY, str(exc)) from exc
    if config.chain_id != genesis.chain_id:
        raise _fail(EXIT_INTEGRITY, "ledger chain id does not match genesis config")
    _emit(
        args,
        {
            "chain_id": config.chain_id,
            "height": state.height,
            "blocks": len(blocks),
            "state": state_hash(state).hex(),
        },
        f"replay ok: {len(blocks)} blocks, height {state.height}, "
        f"state {state_hash(state).hex()}",
    )
    return EXIT_OK


def cmd_sim_attack(args: argparse.Namespace) -> int:
    try:
        params = AttackParams(
            q=args.q, z=args.z, trials=args.trials, seed=args.seed, horizon=args.horizon
        )
    except SecurityError as exc:
        raise _fail(EXIT_USAGE, str(exc)) from exc
    result = simulate_attack(params)
    closed = catch_up_probability(args.q, args.z) if params.closed_form_valid else None
    data = {
        "q": args.q,
        "z": args.z,
        **result.to_dict(),
        "closed_form": closed,
        "closed_form_valid": params.closed_form_valid,
    }
    human = (
        f"catch-up estimate: {result.estimate:.6g} +- {result.stderr:.2g} "
        f"({result.trials} trials, seed {result.seed})\n"
        f"truncation bound: {result.truncation_bound:.3g}"
    )
    if closed is not None:
        human += f"\nclosed form (q/p)^z: {closed:.6g}"
    else:
        human += "\nclosed form not valid for q >= 0.5"
    _emit(args, data, human)
    return EXIT_OK


def cmd_sim_cascade(args: argparse.Namespace) -> int:
    try:
        p = Fraction(args.p)
    except (ValueError, ZeroDivisionError) as exc:
        raise _fail(EXIT_USAGE, f"bad probability {args.p!r}: {exc}") from exc
    if not 0 <= p <= 1:
        raise _fail(EXIT_USAGE, f"probability must be in [0, 1], got {args.p}")
    if args.n < 1:
        raise _fail(EXIT_USAGE, "cascade depth must be >= 1")
    breach = cascade_breach_probability(p, args.n)
    rendered = exact_decimal(breach)
    _emit(
        args,
        {"p": str(p), "n": args.n, "probability": rendered,
         "fraction": f"{breach.numerator}/{breach.denominator}"},
        rendered,
    )
    return EXIT_OK


def cmd_expect_balance(args: argparse.Namespace) -> int:
    chain = load_chain(args.home)
    addr = resolve_address(args.home, args.address)
    try:
        report = balance_query(chain.state, addr)
    except EngineError as exc:
        raise _fail(EXIT_REJECTED, exc.reason.value) from exc
    mismatches = []
    for name, expected in (
        ("spendable", args.spendable),
        ("pending_out", args.pending_out),
        ("pending_in", args.pending_in),
    ):
        if expected is not None and getattr(report, name) != expected:
            mismatches.append(f"{name}: expected {expected}, got {getattr(report, name)}")
    if mismatches:
        raise _fail(EXIT_REJECTED, f"{addr.text}: " + "; ".join(mismatches))
    _emit(args, {"address": addr.text, "ok": True}, f"ok {addr.text}")
    return EXIT_OK


def cmd_expect_account(args: argparse.Namespace) -> int:
    chain = load_chain(args.home)
    addr = resolve_address(args.home, args.address)
    acct = chain.state.account(addr)
    if acct is None:
        raise _fail(EXIT_REJECTED, "unknown-account")
    mismatches = []
    for name, expected in (("frozen", args.frozen), ("closed", args.closed), ("nonce", args.nonce)):
        if expected is not None and getattr(acct, name) != expected:
            mismatches.append(f"{name}: expected {expected}, got {getattr(acct, name)}")
    if mismatches:
        raise _fail(EXIT_REJECTED, f"{addr.text}: " + "; ".join(mismatches))
    _emit(args, {"address": addr.text, "ok": True}, f"ok {addr.text}")
    return EXIT_OK


def cmd_run_scenario(args: argparse.Namespace, depth: int = 0) -> int:
    if depth >= _SCENARIO_DEPTH_LIMIT:
        raise _fail(EXIT_USAGE, "scenario nesting too deep")
    script = Path(args.script)
    if not script.exists():
        raise _fail(EXIT_USAGE, f"no such scenario file: {script}")
    with home_lock(args.home):
        for lineno, raw_line in enumerate(script.read_text().splitlines(), start=1):
            line = raw_line.strip()
            if not line or line.startswith("#"):
                continue
            expect_failure = line.startswith("!")
            if expect_failure:
                line = line[1:].strip()
            argv = ["--home", str(args.home)]
            if args.json:
                argv.append("--json")
            argv += shlex.split(line)
            code = main(argv, _depth=depth + 1)
            if expect_failure and code == EXIT_OK:
                print(f"{script}:{lineno}: expected failure but command succeeded", file=sys.stderr)
                return EXIT_REJECTED
            if not expect_failure and code != EXIT_OK:
                print(f"{script}:{lineno}: command failed with exit code {code}", file=sys.stderr)
                return code
    return EXIT_OK


# --- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vaultledger",
        description="Deterministic ledger with revocable vault transfers.",
    )
    parser.add_argument(
        "--home",
        type=Path,
        default=Path(os.environ.get("VAULTLEDGER_HOME", "vaultledger-home")),
        help="chain home directory (default: $VAULTLEDGER_HOME or ./vaultledger-home)",
    )
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="create a chain home and write the genesis block")
    p.add_argument("--genesis", help="genesis config JSON file")
    p.add_argument("--chain-id", help="chain id for inline genesis")
    p.add_argument("--theta-max", type=int, default=10_000, help="largest allowed delay")
    p.add_argument("--scheme", default="ed25519", help="signature scheme (ed25519|null)")
    p.add_argument(
        "--alloc",
        action="append",
        metavar="ADDR=AMOUNT",
        help="genesis allocation; repeatable; ADDR may be keyname:std sugar",
    )
    p.set_defaults(func=cmd_init)

    keys = sub.add_parser("keys", help="key management").add_subparsers(
        dest="keys_command", required=True
    )
    p = keys.add_parser("gen", help="generate a key and print both addresses")
    p.add_argument("--name", required=True)
    p.add_argument("--seed", help="deterministic seed text (tests/scenarios)")
    p.add_argument("--scheme", help="signature scheme (default: chain scheme)")
    p.add_argument("--insecure", action="store_true", help="store the private key unencrypted")
    p.add_argument("--passphrase", help="encryption passphrase (else env or prompt)")
    p.set_defaults(func=cmd_keys_gen)
    p = keys.add_parser("list", help="list stored keys")
    p.set_defaults(func=cmd_keys_list)

    tx = sub.add_parser("tx", help="build, sign and queue a transaction").add_subparsers(
        dest="tx_command", required=True
    )

    def tx_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--from", required=True, help="sender address or keyname:kind")
        p.add_argument("--passphrase", help="passphrase for the signing key")

    p = tx.add_parser("pay", help="immediate transfer from a standard account")
    tx_common(p)
    p.add_argument("--to", required=True)
    p.add_argument("--amount", type=int, required=True)
    p.set_defaults(func=cmd_tx_pay)

    p = tx.add_parser("account-set", help="register the sender's public key / set metadata")
    tx_common(p)
    p.add_argument("--memo", help="free-form account note")
    p.add_argument("--retrieval", help="must equal the existing binding (vaults only)")
    p.set_defaults(func=cmd_tx_account_set)

    p = tx.add_parser("vault-create", help="fund a new vault bound to a retrieval account")
    tx_common(p)
    p.add_argument("--retrieval", required=True)
    p.add_argument("--amount", type=int, required=True)
    p.add_argument("--vault-key", help="key controlling the vault (default: sender's key)")
    p.set_defaults(func=cmd_tx_vault_create)

    p = tx.add_parser("revocable-pay", help="delayed, revocable transfer from a vault")
    tx_common(p)
    p.add_argument("--to", required=True)
    p.add_argument("--amount", type=int, required=True)
    p.add_argument("--delay", type=int, required=True, help="blocks until maturity")
    p.set_defaults(func=cmd_tx_revocable_pay)

    p = tx.add_parser("revoke", help="cancel an in-flight revocable transfer")
    tx_common(p)
    p.add_argument("--target", required=True, help="transaction id, or `latest`")
    p.set_defaults(func=cmd_tx_revoke)

    p = tx.add_parser("vault-clear", help="drop settled records; --close shuts the vault")
    tx_common(p)
    p.add_argument("--close", action="store_true")
    p.set_defaults(func=cmd_tx_vault_clear)

    block = sub.add_parser("block", help="block production").add_subparsers(
        dest="block_command", required=True
    )
    p = block.add_parser("produce", help="advance the chain by one or more blocks")
    p.add_argument("--count", type=int, default=1)
    p.set_defaults(func=cmd_block_produce)

    query = sub.add_parser("query", help="read-only state queries").add_subparsers(
        dest="query_command", required=True
    )
    p = query.add_parser("balance", help="spendable / pending split for an account")
    p.add_argument("address")
    p.set_defaults(func=cmd_query_balance)
    p = query.add_parser("account", help="full account record")
    p.add_argument("address")
    p.set_defaults(func=cmd_query_account)
    p = query.add_parser("tx", help="look up a transaction by id")
    p.add_argument("txid")
    p.set_defaults(func=cmd_query_tx)

    sim = sub.add_parser("sim", help="attack-probability analysis").add_subparsers(
        dest="sim_command", required=True
    )
    p = sim.add_parser("attack", help="Monte Carlo catch-up race")
    p.add_argument("--q", type=float, required=True, help="attacker hash share")
    p.add_argument("--z", type=int, required=True, help="confirmation depth")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=int, default=10_000)
    p.set_defaults(func=cmd_sim_attack)
    p = sim.add_parser("cascade", help="exact breach probability of an n-level cascade")
    p.add_argument("--p", required=True, help="per-level breach probability (exact decimal)")
    p.add_argument("--n", type=int, required=True, help="cascade depth")
    p.set_defaults(func=cmd_sim_cascade)

    p = sub.add_parser("replay", help="verify the block log from genesis")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("run-scenario", help="execute a script of CLI commands")
    p.add_argument("script")
    p.set_defaults(func=cmd_run_scenario)

    expect = sub.add_parser("expect", help="assertions for scenario scripts").add_subparsers(
        dest="expect_command", required=True
    )
    p = expect.add_parser("balance", help="assert exact balance-query numbers")
    p.add_argument("address")
    p.add_argument("--spendable", type=int)
    p.add_argument("--pending-out", dest="pending_out", type=int)
    p.add_argument("--pending-in", dest="pending_in", type=int)
    p.set_defaults(func=cmd_expect_balance)
    p = expect.add_parser("account", help="assert account flags")
    p.add_argument("address")
    p.add_argument("--frozen", type=_boolish)
    p.add_argument("--closed", type=_boolish)
    p.add_argument("--nonce", type=int)
    p.set_defaults(func=cmd_expect_account)

    return parser


def main(argv: list[str] | None = None, _depth: int = 0) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else EXIT_USAGE
    try:
        if args.func is cmd_run_scenario:
            return cmd_run_scenario(args, depth=_depth)
        return args.func(args)
    except CliFailure as failure:
        print(f"error: {failure.message}", file=sys.stderr)
        return failure.code
    except EngineError as exc:
        print(f"error: {exc.reason.value}", file=sys.stderr)
        return EXIT_REJECTED
    except (TxError, codec.EncodingError, KeyError_) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ChainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
