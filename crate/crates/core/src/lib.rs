//! Deterministic simulator for hashed-timelock atomic cross-chain swaps.
//!
//! Two toy UTXO ledgers, a two-party swap engine with pre-signed timelocked
//! refunds, an intentionally unsafe escrow baseline, payment channels with a
//! cross-channel HTLC swap, and a scenario harness that enumerates abort
//! points and checks that every outcome is all-or-nothing.

pub mod channel;
pub mod conditions;
pub mod harness;
pub mod ledger;
pub mod p2ptradex;
pub mod swap;
pub mod tx;

pub use conditions::{
    evaluate, gen_secret, hash_commit, sighash, Digest, KeyPair, KeyRegistry, Preimage, PublicKey, Signature, SpendCondition,
    Witness,
};
pub use ledger::{ChainError, ChainId, Features, Ledger, LedgerConfig, MempoolPolicy, World};
pub use tx::{Amount, Outpoint, SimTime, Transaction, TxId, TxInput, TxOutput, COIN};
