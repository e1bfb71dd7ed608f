"""Shared fixtures: deterministic keys and pre-funded chains."""

from __future__ import annotations

import pytest

from vaultledger import AccountKind, Chain, GenesisConfig, derive_address
from vaultledger.keys import KeyPair, get_scheme
from vaultledger.tx import Transaction, TxKind, sign_transaction


@pytest.fixture
def null_scheme():
    return get_scheme("null")


def make_keypair(seed: str, scheme: str = "null") -> KeyPair:
    return get_scheme(scheme).from_seed(seed.encode("utf-8"))


def std_addr(kp: KeyPair):
    return derive_address(kp.public, AccountKind.STANDARD)


def vlt_addr(kp: KeyPair):
    return derive_address(kp.public, AccountKind.VAULT)


def make_chain(allocs, theta_max: int = 10, scheme: str = "null", chain_id: str = "test") -> Chain:
    config = GenesisConfig(
        chain_id=chain_id,
        theta_max=theta_max,
        scheme=scheme,
        allocations=tuple(allocs),
    )
    return Chain.create(config)


def signed_tx(kind: TxKind, sender, nonce: int, payload, kp: KeyPair) -> Transaction:
    return sign_transaction(
        Transaction(kind=kind, sender=sender, nonce=nonce, payload=payload), kp
    )


@pytest.fixture
def alice():
    return make_keypair("alice")


@pytest.fixture
def bob():
    return make_keypair("bob")


@pytest.fixture
def carol():
    return make_keypair("carol")
