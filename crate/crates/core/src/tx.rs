//! Amounts, logical time, and transactions with their canonical encoding.
//!
//! Encoding: big-endian, fields in declaration order, every list prefixed by
//! a `u32` element count. See `docs/FORMATS.md` for the byte layout.

use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::conditions::{sha256, Digest, SpendCondition, Witness};

/// Base units per coin.
pub const COIN: u64 = 100_000_000;

/// Non-negative amount in base units.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Amount(pub u64);

impl Amount {
    pub const ZERO: Amount = Amount(0);

    pub fn checked_add(self, other: Amount) -> Option<Amount> {
        self.0.checked_add(other.0).map(Amount)
    }

    pub fn checked_sub(self, other: Amount) -> Option<Amount> {
        self.0.checked_sub(other.0).map(Amount)
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn signed(self) -> i128 {
        i128::from(self.0)
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:08}", self.0 / COIN, self.0 % COIN)
    }
}

/// Logical seconds since genesis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn hours(h: u64) -> SimTime {
        SimTime(h * 3600)
    }

    pub fn saturating_add(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_add(other.0))
    }

    pub fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}s", self.0)
    }
}

pub type TxId = Digest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Outpoint {
    pub tx_id: TxId,
    pub index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxOutput {
    pub amount: Amount,
    pub condition: SpendCondition,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxInput {
    pub outpoint: Outpoint,
    pub witness: Witness,
}

impl TxInput {
    pub fn new(outpoint: Outpoint) -> Self {
        TxInput { outpoint, witness: Witness::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub inputs: Vec<TxInput>,
    pub outputs: Vec<TxOutput>,
    /// Absolute earliest confirmation time; zero means none.
    pub locktime: SimTime,
    pub nonce: u64,
}

impl Transaction {
    pub fn tx_id(&self) -> TxId {
        Digest(sha256(&[&self.encode()]))
    }

    pub fn outpoint(&self, index: u32) -> Outpoint {
        Outpoint { tx_id: self.tx_id(), index }
    }

    pub fn output_total(&self) -> Option<Amount> {
        self.outputs.iter().try_fold(Amount::ZERO, |acc, o| acc.checked_add(o.amount))
    }

    /// Applies `witness` to every input.
    pub fn set_witnesses(&mut self, witness: &Witness) {
        for input in &mut self.inputs {
            input.witness = witness.clone();
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.encode_into(&mut buf, true);
        buf
    }

    pub fn encode_without_witnesses(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.encode_into(&mut buf, false);
        buf
    }

    fn encode_into(&self, buf: &mut Vec<u8>, with_witness: bool) {
        put_len(buf, self.inputs.len());
        for input in &self.inputs {
            buf.extend_from_slice(input.outpoint.tx_id.as_bytes());
            buf.extend_from_slice(&input.outpoint.index.to_be_bytes());
            if with_witness {
                encode_witness(buf, &input.witness);
            } else {
                encode_witness(buf, &Witness::new());
            }
        }
        put_len(buf, self.outputs.len());
        for output in &self.outputs {
            buf.extend_from_slice(&output.amount.0.to_be_bytes());
            encode_condition(buf, &output.condition);
        }
        buf.extend_from_slice(&self.locktime.0.to_be_bytes());
        buf.extend_from_slice(&self.nonce.to_be_bytes());
    }
}

fn put_len(buf: &mut Vec<u8>, n: usize) {
    let n = u32::try_from(n).expect("list length fits in u32");
    buf.extend_from_slice(&n.to_be_bytes());
}

fn encode_witness(buf: &mut Vec<u8>, w: &Witness) {
    put_len(buf, w.signatures.len());
    for (k, s) in &w.signatures {
        buf.extend_from_slice(k.as_bytes());
        buf.extend_from_slice(s.as_bytes());
    }
    put_len(buf, w.preimages.len());
    for p in &w.preimages {
        buf.extend_from_slice(p.as_bytes());
    }
}

pub(crate) fn encode_condition(buf: &mut Vec<u8>, c: &SpendCondition) {
    match c {
        SpendCondition::SignedBy(k) => {
            buf.push(0x01);
            buf.extend_from_slice(k.as_bytes());
        }
        SpendCondition::PreimageOf(d) => {
            buf.push(0x02);
            buf.extend_from_slice(d.as_bytes());
        }
        SpendCondition::And(cs) | SpendCondition::Or(cs) => {
            buf.push(if matches!(c, SpendCondition::And(_)) { 0x03 } else { 0x04 });
            put_len(buf, cs.len());
            for c in cs {
                encode_condition(buf, c);
            }
        }
    }
}
