//! Declarative scenario files (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conditions::SHA256_ALGO_ID;
use crate::ledger::{ChainId, Features, LedgerConfig};
use crate::swap::{DEFAULT_TIMELOCK_A, DEFAULT_TIMELOCK_B};
use crate::tx::{Amount, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    HtlcOnchain,
    P2ptradex,
    ChannelOffchain,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::HtlcOnchain => "htlc_onchain",
            Engine::P2ptradex => "p2ptradex",
            Engine::ChannelOffchain => "channel_offchain",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefundSide {
    /// Bob refuses to co-sign Alice's refund on chain A.
    RefundA,
    /// Alice refuses to co-sign Bob's refund on chain B.
    RefundB,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdversaryStrategy {
    #[default]
    Honest,
    /// Steps `1..=k` run; nobody initiates step `k + 1` or later.
    AbortAfterStep {
        k: usize,
    },
    /// Step `k` runs `dt` seconds late.
    DelayStep {
        k: usize,
        dt: u64,
    },
    /// Alice announces a digest she holds no preimage for.
    WrongDigest,
    RefuseCosign {
        which: RefundSide,
    },
    /// Bob takes Alice's commitment and never moves his own funds.
    Deny,
}

impl AdversaryStrategy {
    /// Short stable label, also used for trace file names.
    pub fn label(&self) -> String {
        match self {
            AdversaryStrategy::Honest => "honest".into(),
            AdversaryStrategy::AbortAfterStep { k } => format!("abort_after_{k}"),
            AdversaryStrategy::DelayStep { k, dt } => format!("delay_step_{k}_by_{dt}"),
            AdversaryStrategy::WrongDigest => "wrong_digest".into(),
            AdversaryStrategy::RefuseCosign { which: RefundSide::RefundA } => "refuse_cosign_refund_a".into(),
            AdversaryStrategy::RefuseCosign { which: RefundSide::RefundB } => "refuse_cosign_refund_b".into(),
            AdversaryStrategy::Deny => "deny".into(),
        }
    }
}

fn default_hash_algo() -> String {
    SHA256_ALGO_ID.to_string()
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub id: ChainId,
    /// Seconds from broadcast to confirmation.
    pub confirmation_delay: u64,
    #[serde(default = "default_hash_algo")]
    pub hash_algo: String,
    #[serde(default = "yes")]
    pub supports_timelock: bool,
    #[serde(default = "yes")]
    pub supports_scripts: bool,
    /// Genesis balance of Alice, base units.
    #[serde(default)]
    pub alice: Amount,
    #[serde(default)]
    pub bob: Amount,
}

impl ChainConfig {
    pub fn ledger_config(&self) -> LedgerConfig {
        LedgerConfig::new(self.id.clone(), SimTime(self.confirmation_delay)).with_features(Features {
            hash_algo_id: self.hash_algo.clone(),
            supports_timelock: self.supports_timelock,
            supports_scripts: self.supports_scripts,
        })
    }
}

fn default_timelock_a() -> u64 {
    DEFAULT_TIMELOCK_A.0
}

fn default_timelock_b() -> u64 {
    DEFAULT_TIMELOCK_B.0
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwapConfig {
    /// Alice gives this on chain A.
    pub n1: Amount,
    /// Bob gives this on chain B.
    pub n2: Amount,
    #[serde(default = "default_timelock_a")]
    pub timelock_a: u64,
    #[serde(default = "default_timelock_b")]
    pub timelock_b: u64,
    /// Overrides the default of twice the claimed chain's delay.
    #[serde(default)]
    pub claim_margin: Option<u64>,
    /// Baseline only; defaults to `timelock_a`.
    #[serde(default)]
    pub proof_deadline: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub engine: Engine,
    pub seed: u64,
    /// Fee on every transaction the engines build.
    #[serde(default)]
    pub fee: Amount,
    /// Charged to each party when the swap is initiated.
    #[serde(default)]
    pub spam_fee: Amount,
    pub chain_a: ChainConfig,
    pub chain_b: ChainConfig,
    pub swap: SwapConfig,
    #[serde(default)]
    pub adversary: AdversaryStrategy,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: {message}")]
    Invalid { path: &'static str, message: String },
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn invalid(path: &'static str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { path, message: message.into() }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Scenario, ScenarioError> {
        let de = toml::Deserializer::parse(text)
            .map_err(|e| ScenarioError::Parse { path: String::from("<document>"), message: e.message().to_string() })?;
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ScenarioError::Parse { path, message: e.into_inner().message().to_string() }
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Default on-chain swap: BTC-sim (600 s blocks) against XRP-sim (5 s),
    /// 0.12345 coins each way.
    pub fn default_htlc(seed: u64) -> Scenario {
        let n = Amount(12_345_000);
        Scenario {
            engine: Engine::HtlcOnchain,
            seed,
            fee: Amount::ZERO,
            spam_fee: Amount::ZERO,
            chain_a: ChainConfig {
                id: ChainId::new("BTC-sim").expect("valid id"),
                confirmation_delay: 600,
                hash_algo: default_hash_algo(),
                supports_timelock: true,
                supports_scripts: true,
                alice: n,
                bob: Amount::ZERO,
            },
            chain_b: ChainConfig {
                id: ChainId::new("XRP-sim").expect("valid id"),
                confirmation_delay: 5,
                hash_algo: default_hash_algo(),
                supports_timelock: true,
                supports_scripts: true,
                alice: Amount::ZERO,
                bob: n,
            },
            swap: SwapConfig {
                n1: n,
                n2: n,
                timelock_a: DEFAULT_TIMELOCK_A.0,
                timelock_b: DEFAULT_TIMELOCK_B.0,
                claim_margin: None,
                proof_deadline: None,
            },
            adversary: AdversaryStrategy::Honest,
            output: None,
        }
    }

    pub fn with_engine(mut self, engine: Engine) -> Scenario {
        self.engine = engine;
        self
    }

    pub fn with_adversary(mut self, adversary: AdversaryStrategy) -> Scenario {
        self.adversary = adversary;
        self
    }

    pub fn step_count(&self) -> usize {
        match self.engine {
            Engine::HtlcOnchain => 8,
            Engine::P2ptradex => 3,
            Engine::ChannelOffchain => 4,
        }
    }

    /// Checks cross-field constraints serde cannot express.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.chain_a.id == self.chain_b.id {
            return Err(invalid("chain_b.id", "must differ from chain_a.id"));
        }
        if self.swap.n1.is_zero() {
            return Err(invalid("swap.n1", "must be positive"));
        }
        if self.swap.n2.is_zero() {
            return Err(invalid("swap.n2", "must be positive"));
        }
        let steps = self.step_count();
        match self.adversary {
            AdversaryStrategy::AbortAfterStep { k } if k > steps => {
                return Err(invalid("adversary.k", format!("{k} exceeds the {} engine's {steps} steps", self.engine.name())));
            }
            AdversaryStrategy::DelayStep { k, .. } if k == 0 || k > steps => {
                return Err(invalid("adversary.k", format!("must be in 1..={steps}")));
            }
            AdversaryStrategy::WrongDigest | AdversaryStrategy::RefuseCosign { .. } if self.engine == Engine::P2ptradex => {
                return Err(invalid("adversary.kind", "not applicable to the p2ptradex engine"));
            }
            _ => {}
        }
        Ok(())
    }
}
