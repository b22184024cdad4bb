//! Deterministic single-chain simulator.
//!
//! A [`Ledger`] holds a UTXO set, a mempool, and a logical clock. Broadcast
//! transactions become eligible at `max(clock + confirmation_delay, locktime)`
//! and confirm when the clock passes that point. Ties are broken by
//! `(eligible_at, tx_id)`; losers of a conflict are evicted.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conditions::{
    hash_commit, sha256, sighash, ConditionError, Digest, KeyRegistry, Preimage, PublicKey, SpendCondition, SHA256_ALGO_ID,
};
use crate::tx::{Amount, Outpoint, SimTime, Transaction, TxId, TxOutput};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ChainId(String);

impl ChainId {
    pub fn new(id: impl Into<String>) -> Result<Self, ChainError> {
        let id = id.into();
        if id.is_empty() || !id.is_ascii() || id.chars().any(|c| c.is_ascii_control()) {
            return Err(ChainError::InvalidChainId(id));
        }
        Ok(ChainId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for ChainId {
    type Error = ChainError;
    fn try_from(s: String) -> Result<Self, ChainError> {
        ChainId::new(s)
    }
}

impl From<ChainId> for String {
    fn from(c: ChainId) -> String {
        c.0
    }
}

impl fmt::Display for ChainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Capabilities a chain must share with its counterpart to host a swap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Features {
    pub hash_algo_id: String,
    pub supports_timelock: bool,
    pub supports_scripts: bool,
}

impl Default for Features {
    fn default() -> Self {
        Features { hash_algo_id: SHA256_ALGO_ID.to_string(), supports_timelock: true, supports_scripts: true }
    }
}

/// What `broadcast` does with a spend that conflicts with a mempool entry.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MempoolPolicy {
    #[default]
    RejectConflicts,
    /// Admit both; `advance_time` confirms the first by `(eligible_at, tx_id)`.
    AllowConflicts,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerConfig {
    pub chain_id: ChainId,
    pub confirmation_delay: SimTime,
    pub features: Features,
    pub mempool_policy: MempoolPolicy,
}

impl LedgerConfig {
    pub fn new(chain_id: ChainId, confirmation_delay: SimTime) -> Self {
        LedgerConfig { chain_id, confirmation_delay, features: Features::default(), mempool_policy: MempoolPolicy::default() }
    }

    pub fn with_features(mut self, features: Features) -> Self {
        self.features = features;
        self
    }

    pub fn with_mempool_policy(mut self, policy: MempoolPolicy) -> Self {
        self.mempool_policy = policy;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("invalid chain id {0:?}")]
    InvalidChainId(String),
    #[error("duplicate chain id {0}")]
    DuplicateChain(ChainId),
    #[error("unknown chain id {0}")]
    UnknownChain(ChainId),
    #[error("zero genesis amount")]
    ZeroGenesisAmount,
    #[error("transaction has no inputs")]
    EmptyTransaction,
    #[error("unknown outpoint {0:?}")]
    UnknownOutpoint(Outpoint),
    #[error("double spend of {0:?}")]
    DoubleSpend(Outpoint),
    #[error("witness rejected for input {0}")]
    WitnessRejected(usize),
    #[error("outputs exceed inputs")]
    ValueCreated,
    #[error("value overflow")]
    Overflow,
    #[error("locktime not supported on this chain")]
    LocktimeNotSupported,
    #[error("output {0} uses a script but this chain has none")]
    ScriptsNotSupported(usize),
    #[error("output {0} has zero amount")]
    ZeroOutput(usize),
    #[error("output {index}: {source}")]
    InvalidCondition { index: usize, source: ConditionError },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfirmedTx {
    pub tx_id: TxId,
    pub tx: Transaction,
    pub broadcast_at: SimTime,
    pub confirmed_at: SimTime,
    /// Outputs consumed by this transaction, in input order.
    pub spent: Vec<TxOutput>,
    pub fee: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct MempoolEntry {
    tx_id: TxId,
    tx: Transaction,
    broadcast_at: SimTime,
    eligible_at: SimTime,
    fee: Amount,
}

/// Result of moving a ledger's clock forward.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AdvanceReport {
    pub confirmed: Vec<TxId>,
    pub evicted: Vec<TxId>,
}

#[derive(Debug, Clone)]
pub struct Ledger {
    config: LedgerConfig,
    keys: Arc<KeyRegistry>,
    clock: SimTime,
    utxo_set: BTreeMap<Outpoint, TxOutput>,
    spent_by: BTreeMap<Outpoint, TxId>,
    confirmed: Vec<ConfirmedTx>,
    confirmed_index: BTreeMap<TxId, usize>,
    mempool: Vec<MempoolEntry>,
    genesis_total: Amount,
    fees: Amount,
}

impl Ledger {
    /// Creates a ledger whose genesis transaction pays one signature-locked
    /// output to each entry.
    pub fn new(config: LedgerConfig, genesis: &[(PublicKey, Amount)], keys: Arc<KeyRegistry>) -> Result<Self, ChainError> {
        if genesis.iter().any(|(_, a)| a.is_zero()) {
            return Err(ChainError::ZeroGenesisAmount);
        }
        let genesis_total =
            genesis.iter().try_fold(Amount::ZERO, |acc, (_, a)| acc.checked_add(*a)).ok_or(ChainError::Overflow)?;
        let chain_tag = sha256(&[config.chain_id.as_str().as_bytes()]);
        let tx = Transaction {
            inputs: vec![],
            outputs: genesis.iter().map(|(k, a)| TxOutput { amount: *a, condition: SpendCondition::SignedBy(*k) }).collect(),
            locktime: SimTime::ZERO,
            nonce: u64::from_be_bytes(chain_tag[..8].try_into().expect("8 bytes")),
        };
        let tx_id = tx.tx_id();
        let mut ledger = Ledger {
            config,
            keys,
            clock: SimTime::ZERO,
            utxo_set: BTreeMap::new(),
            spent_by: BTreeMap::new(),
            confirmed: Vec::new(),
            confirmed_index: BTreeMap::new(),
            mempool: Vec::new(),
            genesis_total,
            fees: Amount::ZERO,
        };
        ledger.apply(MempoolEntry { tx_id, tx, broadcast_at: SimTime::ZERO, eligible_at: SimTime::ZERO, fee: Amount::ZERO });
        Ok(ledger)
    }

    pub fn chain_id(&self) -> &ChainId {
        &self.config.chain_id
    }

    pub fn features(&self) -> &Features {
        &self.config.features
    }

    pub fn config(&self) -> &LedgerConfig {
        &self.config
    }

    pub fn confirmation_delay(&self) -> SimTime {
        self.config.confirmation_delay
    }

    pub fn clock(&self) -> SimTime {
        self.clock
    }

    pub fn keys(&self) -> &KeyRegistry {
        &self.keys
    }

    pub fn genesis_total(&self) -> Amount {
        self.genesis_total
    }

    pub fn cumulative_fees(&self) -> Amount {
        self.fees
    }

    pub fn confirmed(&self) -> &[ConfirmedTx] {
        &self.confirmed
    }

    pub fn genesis_tx_id(&self) -> TxId {
        self.confirmed[0].tx_id
    }

    pub fn confirmed_tx(&self, tx_id: &TxId) -> Option<&ConfirmedTx> {
        self.confirmed_index.get(tx_id).map(|&i| &self.confirmed[i])
    }

    pub fn is_confirmed(&self, tx_id: &TxId) -> bool {
        self.confirmed_index.contains_key(tx_id)
    }

    pub fn in_mempool(&self, tx_id: &TxId) -> bool {
        self.mempool.iter().any(|e| e.tx_id == *tx_id)
    }

    /// Whether a mempool transaction spends `outpoint`.
    pub fn has_pending_spend(&self, outpoint: &Outpoint) -> bool {
        self.mempool.iter().any(|e| e.tx.inputs.iter().any(|i| i.outpoint == *outpoint))
    }

    pub fn mempool_len(&self) -> usize {
        self.mempool.len()
    }

    pub fn utxo(&self, outpoint: &Outpoint) -> Option<&TxOutput> {
        self.utxo_set.get(outpoint)
    }

    /// Transaction that consumed `outpoint`, if a confirmed one did.
    pub fn spender_of(&self, outpoint: &Outpoint) -> Option<&TxId> {
        self.spent_by.get(outpoint)
    }

    pub fn utxo_total(&self) -> Amount {
        Amount(self.utxo_set.values().map(|o| o.amount.0).sum())
    }

    /// `utxo_total + cumulative_fees == genesis_total`.
    pub fn is_conserved(&self) -> bool {
        self.utxo_total().checked_add(self.fees) == Some(self.genesis_total)
    }

    /// Simple-ownership outputs of `key`, in outpoint order.
    pub fn owned_outputs(&self, key: &PublicKey) -> Vec<(Outpoint, Amount)> {
        self.utxo_set.iter().filter(|(_, o)| o.condition.sole_owner() == Some(*key)).map(|(op, o)| (*op, o.amount)).collect()
    }

    /// Sum of unspent outputs locked solely to `key`; contract outputs are
    /// excluded.
    pub fn query_balance(&self, key: &PublicKey) -> Amount {
        Amount(self.owned_outputs(key).iter().map(|(_, a)| a.0).sum())
    }

    /// Finds a confirmed witness revealing the preimage of `digest`.
    pub fn scan_witnesses(&self, digest: &Digest) -> Option<Preimage> {
        self.confirmed
            .iter()
            .flat_map(|c| c.tx.inputs.iter())
            .flat_map(|i| i.witness.preimages.iter())
            .find(|p| hash_commit(p) == *digest)
            .copied()
    }

    /// Bytes of the confirmed log with confirmation times, for determinism
    /// checks.
    pub fn confirmed_log_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for c in &self.confirmed {
            out.extend_from_slice(&c.confirmed_at.0.to_be_bytes());
            out.extend_from_slice(&c.tx.encode());
        }
        out
    }

    /// Validates `tx` and queues it for confirmation.
    pub fn broadcast(&mut self, tx: Transaction) -> Result<TxId, ChainError> {
        let fee = self.validate(&tx)?;
        let tx_id = tx.tx_id();
        let eligible_at = (self.clock + self.config.confirmation_delay).max(tx.locktime);
        self.mempool.push(MempoolEntry { tx_id, tx, broadcast_at: self.clock, eligible_at, fee });
        Ok(tx_id)
    }

    /// Checks every broadcast rule and returns the fee.
    pub fn validate(&self, tx: &Transaction) -> Result<Amount, ChainError> {
        if tx.inputs.is_empty() {
            return Err(ChainError::EmptyTransaction);
        }
        if tx.locktime > SimTime::ZERO && !self.config.features.supports_timelock {
            return Err(ChainError::LocktimeNotSupported);
        }
        for (i, out) in tx.outputs.iter().enumerate() {
            if out.amount.is_zero() {
                return Err(ChainError::ZeroOutput(i));
            }
            out.condition.validate().map_err(|source| ChainError::InvalidCondition { index: i, source })?;
            if !self.config.features.supports_scripts && out.condition.sole_owner().is_none() {
                return Err(ChainError::ScriptsNotSupported(i));
            }
        }

        let mut seen = BTreeSet::new();
        let mut input_total = Amount::ZERO;
        let message = sighash(tx);
        for (i, input) in tx.inputs.iter().enumerate() {
            let op = input.outpoint;
            if !seen.insert(op) || self.spent_by.contains_key(&op) {
                return Err(ChainError::DoubleSpend(op));
            }
            let prev = self.utxo_set.get(&op).ok_or(ChainError::UnknownOutpoint(op))?;
            if self.config.mempool_policy == MempoolPolicy::RejectConflicts && self.has_pending_spend(&op) {
                return Err(ChainError::DoubleSpend(op));
            }
            if !prev.condition.evaluate(&input.witness, &message, &self.keys) {
                return Err(ChainError::WitnessRejected(i));
            }
            input_total = input_total.checked_add(prev.amount).ok_or(ChainError::Overflow)?;
        }
        let output_total = tx.output_total().ok_or(ChainError::Overflow)?;
        input_total.checked_sub(output_total).ok_or(ChainError::ValueCreated)
    }

    /// Moves the clock forward by `dt` and confirms everything that became
    /// eligible, in `(eligible_at, tx_id)` order.
    pub fn advance_time(&mut self, dt: SimTime) -> AdvanceReport {
        self.clock = self.clock.saturating_add(dt);
        let now = self.clock;

        let mut ready = Vec::new();
        let mut waiting = Vec::new();
        for e in self.mempool.drain(..) {
            if e.eligible_at <= now {
                ready.push(e);
            } else {
                waiting.push(e);
            }
        }
        ready.sort_by_key(|a| (a.eligible_at, a.tx_id));

        let mut report = AdvanceReport::default();
        for e in ready {
            if e.tx.inputs.iter().all(|i| self.utxo_set.contains_key(&i.outpoint)) {
                report.confirmed.push(e.tx_id);
                self.apply(e);
            } else {
                report.evicted.push(e.tx_id);
            }
        }
        for e in waiting {
            if e.tx.inputs.iter().all(|i| self.utxo_set.contains_key(&i.outpoint)) {
                self.mempool.push(e);
            } else {
                report.evicted.push(e.tx_id);
            }
        }
        report
    }

    /// Advances to absolute time `t`; no-op when `t` is in the past.
    pub fn advance_to(&mut self, t: SimTime) -> AdvanceReport {
        self.advance_time(t.saturating_sub(self.clock))
    }

    fn apply(&mut self, e: MempoolEntry) {
        let mut spent = Vec::with_capacity(e.tx.inputs.len());
        for input in &e.tx.inputs {
            let prev = self.utxo_set.remove(&input.outpoint).expect("input checked unspent");
            self.spent_by.insert(input.outpoint, e.tx_id);
            spent.push(prev);
        }
        for (i, out) in e.tx.outputs.iter().enumerate() {
            let index = u32::try_from(i).expect("output index fits in u32");
            self.utxo_set.insert(Outpoint { tx_id: e.tx_id, index }, out.clone());
        }
        self.fees = self.fees.checked_add(e.fee).expect("fees bounded by genesis total");
        self.confirmed_index.insert(e.tx_id, self.confirmed.len());
        self.confirmed.push(ConfirmedTx {
            tx_id: e.tx_id,
            tx: e.tx,
            broadcast_at: e.broadcast_at,
            confirmed_at: e.eligible_at,
            spent,
            fee: e.fee,
        });
    }
}

/// A set of ledgers sharing one key registry and one wall clock.
#[derive(Debug, Clone)]
pub struct World {
    keys: Arc<KeyRegistry>,
    ledgers: BTreeMap<ChainId, Ledger>,
}

impl World {
    pub fn new(keys: KeyRegistry) -> Self {
        World { keys: Arc::new(keys), ledgers: BTreeMap::new() }
    }

    pub fn keys(&self) -> &KeyRegistry {
        &self.keys
    }

    pub fn create_ledger(&mut self, config: LedgerConfig, genesis: &[(PublicKey, Amount)]) -> Result<&mut Ledger, ChainError> {
        let id = config.chain_id.clone();
        if self.ledgers.contains_key(&id) {
            return Err(ChainError::DuplicateChain(id));
        }
        let ledger = Ledger::new(config, genesis, Arc::clone(&self.keys))?;
        Ok(self.ledgers.entry(id).or_insert(ledger))
    }

    pub fn ledger(&self, id: &ChainId) -> Result<&Ledger, ChainError> {
        self.ledgers.get(id).ok_or_else(|| ChainError::UnknownChain(id.clone()))
    }

    pub fn ledger_mut(&mut self, id: &ChainId) -> Result<&mut Ledger, ChainError> {
        self.ledgers.get_mut(id).ok_or_else(|| ChainError::UnknownChain(id.clone()))
    }

    /// Mutable access to two distinct ledgers at once.
    pub fn pair_mut(&mut self, a: &ChainId, b: &ChainId) -> Result<(&mut Ledger, &mut Ledger), ChainError> {
        if a == b {
            return Err(ChainError::DuplicateChain(a.clone()));
        }
        let mut first = None;
        let mut second = None;
        for (id, l) in self.ledgers.iter_mut() {
            if id == a {
                first = Some(l);
            } else if id == b {
                second = Some(l);
            }
        }
        match (first, second) {
            (Some(x), Some(y)) => Ok((x, y)),
            (None, _) => Err(ChainError::UnknownChain(a.clone())),
            (_, None) => Err(ChainError::UnknownChain(b.clone())),
        }
    }

    pub fn ledgers(&self) -> impl Iterator<Item = &Ledger> {
        self.ledgers.values()
    }

    pub fn clock(&self) -> SimTime {
        self.ledgers.values().map(Ledger::clock).max().unwrap_or_default()
    }

    /// Advances every ledger by `dt`.
    pub fn advance(&mut self, dt: SimTime) -> Vec<(ChainId, AdvanceReport)> {
        self.ledgers.iter_mut().map(|(id, l)| (id.clone(), l.advance_time(dt))).collect()
    }
}
