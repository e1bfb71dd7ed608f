"""Deterministic account ledger with delay-matured, revocable vault transfers.

Vault accounts send payments that only settle after a per-payment delay;
within that window the vault can revoke the transfer, redirecting the funds
to a retrieval account bound at vault creation.  The package bundles the
transaction engine, a deterministic single-proposer chain with verifiable
replay, an attack-probability simulator, and a CLI.
"""

from .address import AccountKind, Address, AddressError, derive_address, parse_address
from .chain import (
    Block,
    Chain,
    ChainError,
    GenesisConfig,
    Mempool,
    MempoolError,
    Receipt,
    ReplayError,
    build_genesis,
    replay,
    replay_or_genesis,
    state_hash,
)
from .engine import (
    Account,
    BalanceReport,
    EngineError,
    LedgerState,
    PendingStatus,
    PendingTransfer,
    RejectReason,
    apply_account_set,
    apply_irrevocable_pay,
    apply_revocable_pay,
    apply_revoke,
    apply_transaction,
    apply_vault_clear,
    apply_vault_create,
    balance_query,
    mature_pending,
    total_value,
    validate,
)
from .keys import Ed25519Scheme, KeyPair, NullScheme, get_scheme
from .security import (
    AttackParams,
    SimResult,
    acceptance_probability_estimate,
    cascade_breach_probability,
    catch_up_probability,
    epsilon_robustness_ratio,
    model_robustness,
    simulate_attack,
)
from .tx import Transaction, TxId, TxKind, canonical_encode, sign_transaction, tx_id

__version__ = "0.1.0"

__all__ = [
    "AccountKind",
    "Address",
    "AddressError",
    "derive_address",
    "parse_address",
    "Block",
    "Chain",
    "ChainError",
    "GenesisConfig",
    "Mempool",
    "MempoolError",
    "Receipt",
    "ReplayError",
    "build_genesis",
    "replay",
    "replay_or_genesis",
    "state_hash",
    "Account",
    "BalanceReport",
    "EngineError",
    "LedgerState",
    "PendingStatus",
    "PendingTransfer",
    "RejectReason",
    "apply_account_set",
    "apply_irrevocable_pay",
    "apply_revocable_pay",
    "apply_revoke",
    "apply_transaction",
    "apply_vault_clear",
    "apply_vault_create",
    "balance_query",
    "mature_pending",
    "total_value",
    "validate",
    "Ed25519Scheme",
    "KeyPair",
    "NullScheme",
    "get_scheme",
    "AttackParams",
    "SimResult",
    "acceptance_probability_estimate",
    "cascade_breach_probability",
    "catch_up_probability",
    "epsilon_robustness_ratio",
    "model_robustness",
    "simulate_attack",
    "Transaction",
    "TxId",
    "TxKind",
    "canonical_encode",
    "sign_transaction",
    "tx_id",
]
