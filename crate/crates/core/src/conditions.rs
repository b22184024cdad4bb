//! Spend conditions: hashlocks, signatures, and their composition.
//!
//! Signatures here are a deterministic toy scheme for simulation only:
//! `sig = SHA256("sig" || secret || message)`, checked by looking the secret
//! up in a [`KeyRegistry`]. It is NOT cryptographically secure; it only keeps
//! the protocol-relevant properties (binding to the signed message, per-key
//! validity).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::tx::Transaction;

/// Maximum nesting depth of a [`SpendCondition`] tree.
pub const MAX_CONDITION_DEPTH: usize = 8;

/// Identifier of the commitment hash used by both simulated chains.
pub const SHA256_ALGO_ID: &str = "sha256";

pub(crate) fn sha256(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

macro_rules! bytes32 {
    ($name:ident) => {
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub [u8; 32]);

        impl $name {
            pub fn as_bytes(&self) -> &[u8; 32] {
                &self.0
            }

            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), &self.to_hex()[..16])
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_hex())
            }
        }

        impl Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                let mut out = [0u8; 32];
                hex::decode_to_slice(&s, &mut out).map_err(serde::de::Error::custom)?;
                Ok($name(out))
            }
        }
    };
}

bytes32!(Digest);
bytes32!(Preimage);
bytes32!(PublicKey);
bytes32!(Signature);

/// SHA-256 of the raw preimage bytes.
pub fn hash_commit(preimage: &Preimage) -> Digest {
    Digest(sha256(&[&preimage.0]))
}

/// Draws a 32-byte secret from ChaCha20 seeded with `seed` via
/// `SeedableRng::seed_from_u64`.
pub fn gen_secret(seed: u64) -> Preimage {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = [0u8; 32];
    rng.fill_bytes(&mut out);
    Preimage(out)
}

/// Digest of the transaction with every witness emptied.
pub fn sighash(tx: &Transaction) -> Digest {
    Digest(sha256(&[&tx.encode_without_witnesses()]))
}

#[derive(Clone, PartialEq, Eq)]
pub struct KeyPair {
    secret: [u8; 32],
    public: PublicKey,
}

impl KeyPair {
    pub fn from_secret(secret: [u8; 32]) -> Self {
        let public = PublicKey(sha256(&[b"pk", &secret]));
        KeyPair { secret, public }
    }

    /// Derives a key from a label and a simulation seed.
    pub fn derive(label: &str, seed: u64) -> Self {
        Self::from_secret(sha256(&[b"key", label.as_bytes(), &seed.to_be_bytes()]))
    }

    pub fn public(&self) -> PublicKey {
        self.public
    }

    pub fn sign_digest(&self, message: &Digest) -> Signature {
        Signature(sha256(&[b"sig", &self.secret, &message.0]))
    }

    pub fn sign(&self, tx: &Transaction) -> Signature {
        self.sign_digest(&sighash(tx))
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair").field("public", &self.public).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KeyError {
    #[error("unknown public key {0}")]
    UnknownKey(PublicKey),
    #[error("public key collision for {0}")]
    Collision(PublicKey),
}

/// Lookup table from public key to secret, used to check toy signatures.
#[derive(Debug, Clone, Default)]
pub struct KeyRegistry {
    secrets: BTreeMap<PublicKey, [u8; 32]>,
}

impl KeyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registering the same key twice is a no-op; two distinct secrets with
    /// the same public key are rejected.
    pub fn register(&mut self, key: &KeyPair) -> Result<(), KeyError> {
        match self.secrets.get(&key.public) {
            Some(s) if *s != key.secret => Err(KeyError::Collision(key.public)),
            Some(_) => Ok(()),
            None => {
                self.secrets.insert(key.public, key.secret);
                Ok(())
            }
        }
    }

    pub fn contains(&self, key: &PublicKey) -> bool {
        self.secrets.contains_key(key)
    }

    pub fn verify_digest(&self, key: &PublicKey, message: &Digest, sig: &Signature) -> Result<bool, KeyError> {
        let secret = self.secrets.get(key).ok_or(KeyError::UnknownKey(*key))?;
        Ok(sha256(&[b"sig", secret, &message.0]) == sig.0)
    }

    pub fn verify(&self, key: &PublicKey, tx: &Transaction, sig: &Signature) -> Result<bool, KeyError> {
        self.verify_digest(key, &sighash(tx), sig)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConditionError {
    #[error("condition nesting exceeds depth {MAX_CONDITION_DEPTH}")]
    TooDeep,
    #[error("empty And/Or list")]
    EmptyComposite,
}

/// Predicate tree guarding a transaction output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpendCondition {
    SignedBy(PublicKey),
    PreimageOf(Digest),
    And(Vec<SpendCondition>),
    Or(Vec<SpendCondition>),
}

impl SpendCondition {
    /// Hashed-timelock script: the claimer spends with the preimage and its
    /// signature, or both parties co-sign (the pre-signed refund path).
    pub fn htlc(digest: Digest, claimer: PublicKey, refunder: PublicKey) -> Self {
        SpendCondition::Or(vec![
            SpendCondition::And(vec![SpendCondition::PreimageOf(digest), SpendCondition::SignedBy(claimer)]),
            SpendCondition::multisig(refunder, claimer),
        ])
    }

    pub fn multisig(a: PublicKey, b: PublicKey) -> Self {
        SpendCondition::And(vec![SpendCondition::SignedBy(a), SpendCondition::SignedBy(b)])
    }

    pub fn depth(&self) -> usize {
        match self {
            SpendCondition::SignedBy(_) | SpendCondition::PreimageOf(_) => 1,
            SpendCondition::And(c) | SpendCondition::Or(c) => 1 + c.iter().map(SpendCondition::depth).max().unwrap_or(0),
        }
    }

    pub fn validate(&self) -> Result<(), ConditionError> {
        fn walk(c: &SpendCondition, depth: usize) -> Result<(), ConditionError> {
            if depth > MAX_CONDITION_DEPTH {
                return Err(ConditionError::TooDeep);
            }
            match c {
                SpendCondition::SignedBy(_) | SpendCondition::PreimageOf(_) => Ok(()),
                SpendCondition::And(cs) | SpendCondition::Or(cs) => {
                    if cs.is_empty() {
                        return Err(ConditionError::EmptyComposite);
                    }
                    cs.iter().try_for_each(|c| walk(c, depth + 1))
                }
            }
        }
        walk(self, 1)
    }

    /// The owner key if this is a plain single-signature output.
    pub fn sole_owner(&self) -> Option<PublicKey> {
        match self {
            SpendCondition::SignedBy(k) => Some(*k),
            _ => None,
        }
    }

    /// Every digest referenced by a hashlock anywhere in the tree.
    pub fn hashlocks(&self) -> Vec<Digest> {
        let mut out = Vec::new();
        fn walk(c: &SpendCondition, out: &mut Vec<Digest>) {
            match c {
                SpendCondition::PreimageOf(d) => out.push(*d),
                SpendCondition::SignedBy(_) => {}
                SpendCondition::And(cs) | SpendCondition::Or(cs) => cs.iter().for_each(|c| walk(c, out)),
            }
        }
        walk(self, &mut out);
        out
    }

    /// Pure evaluation against a witness. Unknown keys and bad signatures
    /// make the leaf false; nothing here errors.
    pub fn evaluate(&self, witness: &Witness, message: &Digest, keys: &KeyRegistry) -> bool {
        match self {
            SpendCondition::SignedBy(k) => {
                witness.signatures.get(k).is_some_and(|sig| keys.verify_digest(k, message, sig).unwrap_or(false))
            }
            SpendCondition::PreimageOf(d) => witness.preimages.iter().any(|p| hash_commit(p) == *d),
            SpendCondition::And(cs) => !cs.is_empty() && cs.iter().all(|c| c.evaluate(witness, message, keys)),
            SpendCondition::Or(cs) => cs.iter().any(|c| c.evaluate(witness, message, keys)),
        }
    }
}

/// Evaluates `cond` for an input of `tx`.
pub fn evaluate(cond: &SpendCondition, witness: &Witness, tx: &Transaction, keys: &KeyRegistry) -> bool {
    cond.evaluate(witness, &sighash(tx), keys)
}

/// Data supplied to satisfy a condition: an unordered set of independent
/// signatures and any revealed preimages.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub signatures: BTreeMap<PublicKey, Signature>,
    pub preimages: BTreeSet<Preimage>,
}

impl Witness {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_signature(mut self, key: PublicKey, sig: Signature) -> Self {
        self.signatures.insert(key, sig);
        self
    }

    pub fn with_preimage(mut self, p: Preimage) -> Self {
        self.preimages.insert(p);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.signatures.is_empty() && self.preimages.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tx::{Amount, Outpoint, SimTime, TxInput, TxOutput};
    use proptest::prelude::*;

    fn keys() -> (KeyPair, KeyPair, KeyRegistry) {
        let alice = KeyPair::derive("alice", 7);
        let bob = KeyPair::derive("bob", 7);
        let mut reg = KeyRegistry::new();
        reg.register(&alice).unwrap();
        reg.register(&bob).unwrap();
        (alice, bob, reg)
    }

    fn spend_tx(locktime: u64, amount: u64) -> Transaction {
        Transaction {
            inputs: vec![TxInput::new(Outpoint { tx_id: Digest([9; 32]), index: 0 })],
            outputs: vec![TxOutput { amount: Amount(amount), condition: SpendCondition::SignedBy(PublicKey([1; 32])) }],
            locktime: SimTime(locktime),
            nonce: 0,
        }
    }

    #[test]
    fn sha256_of_zero_preimage() {
        assert_eq!(hash_commit(&Preimage([0; 32])).to_hex(), "66687aadf862bd776c8fc18b8e9f8e20089714856ee233b3902a591d0d5f2925");
    }

    #[test]
    fn hash_commit_is_deterministic() {
        let x = gen_secret(11);
        assert_eq!(hash_commit(&x), hash_commit(&x));
    }

    #[test]
    fn gen_secret_is_seeded() {
        assert_eq!(gen_secret(1), gen_secret(1));
        assert_ne!(gen_secret(1), gen_secret(2));
    }

    #[test]
    fn gen_secret_golden() {
        // ChaCha20 seed_from_u64(42); digest cross-checked with hashlib.
        let x = gen_secret(42);
        assert_eq!(x.to_hex(), GOLDEN_SECRET_42);
        assert_eq!(hash_commit(&x).to_hex(), GOLDEN_DIGEST_42);
    }

    const GOLDEN_SECRET_42: &str = "7848b5d711bc9883996317a3f9c90269d56771005d540a19184939c9e8d0db2a";
    const GOLDEN_DIGEST_42: &str = "1f8a523d6e25b2dde34d835b5d1b5a82d0ca2b2230f8d72d522a786b068f2169";

    #[test]
    fn sighash_ignores_witnesses() {
        let (alice, _, _) = keys();
        let bare = spend_tx(0, 5);
        let mut signed = bare.clone();
        signed.inputs[0].witness = Witness::new().with_signature(alice.public(), alice.sign(&bare));
        assert_eq!(sighash(&bare), sighash(&signed));
        assert_ne!(bare.tx_id(), signed.tx_id());
    }

    #[test]
    fn sighash_commits_to_locktime_and_amount() {
        assert_ne!(sighash(&spend_tx(0, 5)), sighash(&spend_tx(1, 5)));
        assert_ne!(sighash(&spend_tx(0, 5)), sighash(&spend_tx(0, 6)));
    }

    #[test]
    fn sign_and_verify() {
        let (alice, bob, reg) = keys();
        let tx = spend_tx(172_800, 5);
        let sig = alice.sign(&tx);
        assert_eq!(reg.verify(&alice.public(), &tx, &sig), Ok(true));
        assert_eq!(reg.verify(&bob.public(), &tx, &sig), Ok(false));
    }

    #[test]
    fn verify_unknown_key_errors() {
        let (alice, _, reg) = keys();
        let stranger = KeyPair::derive("carol", 1);
        let tx = spend_tx(0, 1);
        assert_eq!(reg.verify(&stranger.public(), &tx, &alice.sign(&tx)), Err(KeyError::UnknownKey(stranger.public())));
    }

    #[test]
    fn signature_survives_witness_attachment() {
        let (alice, bob, reg) = keys();
        let mut refund = spend_tx(172_800, 5);
        let bob_sig = bob.sign(&refund);
        refund.inputs[0].witness = Witness::new().with_signature(alice.public(), alice.sign(&refund));
        assert_eq!(reg.verify(&bob.public(), &refund, &bob_sig), Ok(true));
    }

    #[test]
    fn registry_rejects_collision() {
        let a = KeyPair::derive("a", 1);
        let mut reg = KeyRegistry::new();
        reg.register(&a).unwrap();
        reg.register(&a).unwrap();
        let forged = KeyPair { secret: [3; 32], public: a.public() };
        assert_eq!(reg.register(&forged), Err(KeyError::Collision(a.public())));
    }

    #[test]
    fn htlc_branches() {
        let (alice, bob, reg) = keys();
        let x = gen_secret(5);
        let script = SpendCondition::htlc(hash_commit(&x), bob.public(), alice.public());
        let tx = spend_tx(0, 5);

        let claim = Witness::new().with_preimage(x).with_signature(bob.public(), bob.sign(&tx));
        assert!(evaluate(&script, &claim, &tx, &reg));

        let refund = Witness::new().with_signature(alice.public(), alice.sign(&tx)).with_signature(bob.public(), bob.sign(&tx));
        assert!(evaluate(&script, &refund, &tx, &reg));

        let preimage_only = Witness::new().with_preimage(x);
        assert!(!evaluate(&script, &preimage_only, &tx, &reg));

        let alice_claim = Witness::new().with_preimage(x).with_signature(alice.public(), alice.sign(&tx));
        assert!(!evaluate(&script, &alice_claim, &tx, &reg));
    }

    #[test]
    fn validate_depth_and_empty() {
        let leaf = SpendCondition::PreimageOf(Digest([0; 32]));
        let mut c = leaf.clone();
        for _ in 0..7 {
            c = SpendCondition::And(vec![c]);
        }
        assert_eq!(c.depth(), 8);
        assert!(c.validate().is_ok());
        let too_deep = SpendCondition::Or(vec![c]);
        assert_eq!(too_deep.validate(), Err(ConditionError::TooDeep));
        assert_eq!(SpendCondition::Or(vec![]).validate(), Err(ConditionError::EmptyComposite));
        assert!(!SpendCondition::And(vec![]).evaluate(&Witness::new(), &Digest([0; 32]), &KeyRegistry::new()));
    }

    proptest! {
        #[test]
        fn preimage_binding(x in any::<[u8; 32]>(), y in any::<[u8; 32]>()) {
            let reg = KeyRegistry::new();
            let msg = Digest([0; 32]);
            let cond = SpendCondition::PreimageOf(hash_commit(&Preimage(x)));
            prop_assert!(cond.evaluate(&Witness::new().with_preimage(Preimage(x)), &msg, &reg));
            if x != y {
                prop_assert!(!cond.evaluate(&Witness::new().with_preimage(Preimage(y)), &msg, &reg));
            }
        }

        #[test]
        fn htlc_exclusivity(
            seed in any::<u64>(),
            with_preimage in any::<bool>(),
            wrong_preimage in any::<[u8; 32]>(),
            sign_alice in any::<bool>(),
            sign_bob in any::<bool>(),
            forge_bob in any::<[u8; 32]>(),
        ) {
            let (alice, bob, reg) = keys();
            let x = gen_secret(seed);
            let script = SpendCondition::htlc(hash_commit(&x), bob.public(), alice.public());
            let tx = spend_tx(0, 5);
            let mut w = Witness::new().with_preimage(Preimage(wrong_preimage));
            if with_preimage { w = w.with_preimage(x); }
            if sign_alice { w = w.with_signature(alice.public(), alice.sign(&tx)); }
            w = if sign_bob {
                w.with_signature(bob.public(), bob.sign(&tx))
            } else {
                w.with_signature(bob.public(), Signature(forge_bob))
            };
            let expected = sign_bob && (with_preimage || sign_alice || hash_commit(&Preimage(wrong_preimage)) == hash_commit(&x));
            prop_assert_eq!(evaluate(&script, &w, &tx, &reg), expected);
        }

        #[test]
        fn signature_non_transferable(a in 0u64..1000, b in 0u64..1000) {
            let (alice, _, reg) = keys();
            let t1 = spend_tx(a, 1);
            let t2 = spend_tx(b, 1);
            let sig = alice.sign(&t1);
            prop_assert_eq!(reg.verify(&alice.public(), &t2, &sig).unwrap(), sighash(&t1) == sighash(&t2));
        }
    }
}
