"""Deterministic random-workload machinery shared across the test suite."""

from __future__ import annotations

import random
from pathlib import Path

from vaultledger import (
    AccountKind,
    Chain,
    GenesisConfig,
    PendingStatus,
    derive_address,
    mature_pending,
    total_value,
    validate,
)
from vaultledger.address import Address
from vaultledger.engine import apply_validated
from vaultledger.keys import KeyPair, get_scheme
from vaultledger.tx import (
    AccountSetPayload,
    BasicPayload,
    IrrevocablePayPayload,
    RevocablePayPayload,
    RevokePayload,
    Transaction,
    TxId,
    TxKind,
    VaultClearPayload,
    VaultCreatePayload,
    sign_transaction,
    tx_id,
)


def random_address(rng: random.Random, kind: AccountKind | None = None) -> Address:
    if kind is None:
        kind = rng.choice(list(AccountKind))
    return Address(kind=kind, body=rng.getrandbits(160).to_bytes(20, "big"))


def random_transaction(rng: random.Random, counter: int) -> Transaction:
    """Structurally valid unsigned transaction with randomized fields.

    The counter rides in the nonce, so every generated transaction is
    logically distinct even when the random payload repeats.
    """
    kind = rng.choice(
        [
            TxKind.BASIC,
            TxKind.IRREVOCABLE_PAY,
            TxKind.ACCOUNT_SET,
            TxKind.VAULT_CREATE,
            TxKind.REVOCABLE_PAY,
            TxKind.REVOKE,
            TxKind.VAULT_CLEAR,
        ]
    )
    amount = rng.getrandbits(64)
    if kind is TxKind.BASIC:
        payload = BasicPayload(to=random_address(rng), amount=amount)
        sender = payload.to
    elif kind is TxKind.IRREVOCABLE_PAY:
        payload = IrrevocablePayPayload(to=random_address(rng), amount=amount)
        sender = random_address(rng, AccountKind.STANDARD)
    elif kind is TxKind.ACCOUNT_SET:
        payload = AccountSetPayload(
            pubkey=rng.getrandbits(256).to_bytes(32, "big"),
            retrieval=random_address(rng) if rng.random() < 0.3 else None,
            memo="m" * rng.randrange(0, 16) if rng.random() < 0.3 else None,
        )
        sender = random_address(rng)
    elif kind is TxKind.VAULT_CREATE:
        payload = VaultCreatePayload(
            vault_pubkey=rng.getrandbits(256).to_bytes(32, "big"),
            retrieval=random_address(rng),
            amount=amount,
        )
        sender = random_address(rng, AccountKind.STANDARD)
    elif kind is TxKind.REVOCABLE_PAY:
        payload = RevocablePayPayload(
            to=random_address(rng), amount=amount, delay=rng.randrange(1, 10_000)
        )
        sender = random_address(rng, AccountKind.VAULT)
    elif kind is TxKind.REVOKE:
        payload = RevokePayload(
            target=TxId(prefix="REVOCABLEPAY", digest=rng.getrandbits(256).to_bytes(32, "big").hex())
        )
        sender = random_address(rng, AccountKind.VAULT)
    else:
        payload = VaultClearPayload(close=rng.random() < 0.5)
        sender = random_address(rng, AccountKind.VAULT)
    return Transaction(kind=kind, sender=sender, nonce=counter, payload=payload)


class Workload:
    """Seeded random driver: accounts, vaults, transfers, revokes, blocks.

    Same seed, same everything - transaction bytes, block boundaries,
    ledger file content.  Valid transactions are built against a projection
    of the next block's state so they apply cleanly; a slice of deliberately
    broken ones exercises the rejection receipts.
    """

    def __init__(
        self,
        seed: int,
        n_accounts: int = 50,
        theta_max: int = 10,
        scheme: str = "ed25519",
        path: Path | None = None,
        chain_id: str = "workload",
        invalid_rate: float = 0.05,
    ):
        self.rng = random.Random(seed)
        self.scheme = get_scheme(scheme)
        self.invalid_rate = invalid_rate
        self.keys: dict[str, KeyPair] = {}
        self.vault_count = 0
        allocations = []
        for i in range(n_accounts):
            kp = self.scheme.from_seed(f"workload-acct-{seed}-{i}".encode())
            addr = derive_address(kp.public, AccountKind.STANDARD)
            self.keys[addr.text] = kp
            allocations.append((addr, self.rng.randrange(0, 2_000)))
        config = GenesisConfig(
            chain_id=chain_id,
            theta_max=theta_max,
            scheme=scheme,
            allocations=tuple(allocations),
        )
        self.chain = Chain.create(config, path=path)
        self.registered: set[str] = set()
        self.tx_ids: list[str] = []
        # genesis accounts are the only standard ones; vaults are appended
        # in creation order so every rng.choice universe is deterministic
        self.std_addrs: list[str] = sorted(a.text for a, _ in allocations)
        self.vault_addrs: list[str] = []
        self.known_addrs: list[str] = list(self.std_addrs)
        self._reset_projection()

    # -- projection of the next block's state --------------------------------

    def _reset_projection(self) -> None:
        self.proj = mature_pending(self.chain.state, self.chain.height + 1)

    def submit(self, tx: Transaction, expect_valid: bool) -> None:
        reason = validate(tx, self.proj, self.proj.height)
        if expect_valid:
            assert reason is None, f"workload built an invalid tx: {reason}"
            self.proj = apply_validated(self.proj, tx)
        self.chain.submit(tx)
        self.tx_ids.append(tx_id(tx).text)

    def produce(self) -> None:
        self.chain.produce_block()
        self._reset_projection()

    # -- account helpers ------------------------------------------------------

    def _signer(self, addr_text: str) -> KeyPair:
        return self.keys[addr_text]

    def _standard_accounts(self) -> list[str]:
        return self.std_addrs

    def _vault_accounts(self, unfrozen_only: bool = False) -> list[str]:
        out = []
        for a in self.vault_addrs:
            acct = self.proj.accounts.get(a)
            if acct is None or acct.closed:
                continue
            if unfrozen_only and acct.frozen:
                continue
            out.append(a)
        return out

    def _spendable_std(self, minimum: int = 1) -> str | None:
        candidates = [
            a
            for a in self.std_addrs
            if a in self.registered and self.proj.accounts[a].spendable >= minimum
        ]
        return self.rng.choice(candidates) if candidates else None

    def _tx(self, kind: TxKind, sender_text: str, payload) -> Transaction:
        sender = self.proj.accounts[sender_text].address
        nonce = self.proj.accounts[sender_text].nonce
        unsigned = Transaction(kind=kind, sender=sender, nonce=nonce, payload=payload)
        return sign_transaction(unsigned, self._signer(sender_text))

    # -- one random step -------------------------------------------------------

    def step(self) -> None:
        rng = self.rng
        if rng.random() < self.invalid_rate:
            self._step_invalid()
            return
        unregistered = [a for a in self._standard_accounts() if a not in self.registered]
        if unregistered and rng.random() < 0.4:
            addr_text = rng.choice(unregistered)
            payload = AccountSetPayload(pubkey=self.keys[addr_text].public)
            self.submit(self._tx(TxKind.ACCOUNT_SET, addr_text, payload), expect_valid=True)
            self.registered.add(addr_text)
            return
        choice = rng.random()
        if choice < 0.35:
            self._step_pay()
        elif choice < 0.50:
            self._step_vault_create()
        elif choice < 0.80:
            self._step_revocable_pay()
        elif choice < 0.92:
            self._step_revoke()
        else:
            self._step_vault_clear()

    def _step_pay(self) -> None:
        sender = self._spendable_std()
        if sender is None:
            return
        spendable = self.proj.accounts[sender].spendable
        to = self.rng.choice(self.known_addrs)
        amount = self.rng.randrange(0, spendable + 1)
        payload = IrrevocablePayPayload(to=self.proj.accounts[to].address, amount=amount)
        self.submit(self._tx(TxKind.IRREVOCABLE_PAY, sender, payload), expect_valid=True)

    def _step_vault_create(self) -> None:
        sender = self._spendable_std(minimum=10)
        if sender is None:
            return
        self.vault_count += 1
        vault_kp = self.scheme.from_seed(f"workload-vault-{self.vault_count}".encode())
        vault_addr = derive_address(vault_kp.public, AccountKind.VAULT)
        if vault_addr.text in self.proj.accounts:
            return
        retrieval = self.rng.choice(self._standard_accounts())
        amount = self.rng.randrange(1, self.proj.accounts[sender].spendable + 1)
        payload = VaultCreatePayload(
            vault_pubkey=vault_kp.public,
            retrieval=self.proj.accounts[retrieval].address,
            amount=amount,
        )
        self.keys[vault_addr.text] = vault_kp
        self.vault_addrs.append(vault_addr.text)
        self.known_addrs.append(vault_addr.text)
        self.submit(self._tx(TxKind.VAULT_CREATE, sender, payload), expect_valid=True)

    def _step_revocable_pay(self) -> None:
        vaults = [
            v
            for v in self._vault_accounts(unfrozen_only=True)
            if self.proj.accounts[v].spendable >= 1
        ]
        if not vaults:
            return
        sender = self.rng.choice(vaults)
        to = self.rng.choice(self.known_addrs)
        amount = self.rng.randrange(1, self.proj.accounts[sender].spendable + 1)
        delay = self.rng.randrange(1, self.proj.theta_max + 1)
        payload = RevocablePayPayload(
            to=self.proj.accounts[to].address, amount=amount, delay=delay
        )
        self.submit(self._tx(TxKind.REVOCABLE_PAY, sender, payload), expect_valid=True)

    def _step_revoke(self) -> None:
        candidates = []
        for v in self._vault_accounts():
            for p in self.proj.accounts[v].pending:
                if (
                    p.status is PendingStatus.PENDING
                    and self.proj.height < p.maturity_height
                ):
                    candidates.append((v, p.source_tx))
        if not candidates:
            return
        vault, target = self.rng.choice(candidates)
        payload = RevokePayload(target=TxId.parse(target))
        self.submit(self._tx(TxKind.REVOKE, vault, payload), expect_valid=True)

    def _step_vault_clear(self) -> None:
        vaults = self._vault_accounts()
        if not vaults:
            return
        vault = self.rng.choice(vaults)
        acct = self.proj.accounts[vault]
        close = self.rng.random() < 0.2 and acct.live_pending() == 0
        payload = VaultClearPayload(close=close)
        self.submit(self._tx(TxKind.VAULT_CLEAR, vault, payload), expect_valid=True)

    def _step_invalid(self) -> None:
        """Deliberately broken transaction; lands as a rejection receipt."""
        rng = self.rng
        sender = self._spendable_std()
        if sender is None:
            return
        mode = rng.randrange(3)
        acct = self.proj.accounts[sender]
        # invalid txs never advance a nonce, so salt them with a counter to
        # keep their ids unique within one mempool window
        salt = len(self.tx_ids)
        if mode == 0:  # overspend
            payload = IrrevocablePayPayload(
                to=acct.address, amount=acct.spendable + 1_000_000 + salt
            )
            tx = self._tx(TxKind.IRREVOCABLE_PAY, sender, payload)
        elif mode == 1:  # stale nonce
            payload = IrrevocablePayPayload(to=acct.address, amount=0)
            unsigned = Transaction(
                kind=TxKind.IRREVOCABLE_PAY,
                sender=acct.address,
                nonce=acct.nonce + 7 + salt,
                payload=payload,
            )
            tx = sign_transaction(unsigned, self._signer(sender))
        else:  # revoke of a target that never existed
            fake = TxId(prefix="REVOCABLEPAY", digest=rng.getrandbits(256).to_bytes(32, "big").hex())
            vault_addr = derive_address(self.keys[sender].public, AccountKind.VAULT)
            unsigned = Transaction(
                kind=TxKind.REVOKE, sender=vault_addr, nonce=salt, payload=RevokePayload(target=fake)
            )
            tx = sign_transaction(unsigned, self._signer(sender))
        self.submit(tx, expect_valid=False)

    # -- main loop ---------------------------------------------------------------

    def run(self, n_txs: int, block_every: int = 10, after_block=None) -> None:
        since_block = 0
        submitted = len(self.tx_ids)
        target = submitted + n_txs
        while len(self.tx_ids) < target:
            before = len(self.tx_ids)
            self.step()
            if len(self.tx_ids) > before:
                since_block += 1
            if since_block >= block_every:
                self.produce()
                since_block = 0
                if after_block is not None:
                    after_block(self.chain)
                if self.rng.random() < 0.2:
                    self.produce()
                    if after_block is not None:
                        after_block(self.chain)
        # flush the tail and let outstanding transfers mature
        self.produce()
        if after_block is not None:
            after_block(self.chain)
        for _ in range(self.chain.state.theta_max + 1):
            self.produce()
            if after_block is not None:
                after_block(self.chain)

    def conservation_holds(self) -> bool:
        return total_value(self.chain.state) == self.chain.state.issuance
