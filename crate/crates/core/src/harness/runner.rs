//! Drives one engine through its step schedule under an adversary.
//!
//! An aborting party stops initiating steps but keeps protecting itself:
//! Bob still claims chain A once `x` is public, and both parties still fire
//! their refunds when the timelocks open. Non-honest runs always end past
//! both timelocks so every eligible refund has confirmed.

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{open_channel, Channel, ChannelError, Side};
use crate::conditions::{gen_secret, hash_commit, sha256, Digest, KeyError, KeyPair, KeyRegistry, PublicKey};
use crate::harness::atomicity::check_atomicity;
use crate::harness::incentives::{IncentiveError, IncentiveLedger};
use crate::harness::scenario::{AdversaryStrategy, Engine, RefundSide, Scenario};
use crate::harness::trace::{BalanceChange, BalanceRecord, EventKind, ScenarioTrace, TraceEvent};
use crate::harness::Party;
use crate::ledger::{ChainError, ChainId, Ledger, World};
use crate::p2ptradex::{TradeXError, TradeXOffer, TradeXPhase, TradeXSession};
use crate::swap::{Phase, SwapError, SwapParams, SwapSession};
use crate::tx::{Amount, SimTime, TxId};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Swap(#[from] SwapError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    TradeX(#[from] TradeXError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Key(#[from] KeyError),
    #[error(transparent)]
    Incentive(#[from] IncentiveError),
}

/// One protocol step and the party who initiates it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Step {
    pub name: &'static str,
    pub owner: Party,
}

const fn step(name: &'static str, owner: Party) -> Step {
    Step { name, owner }
}

const HTLC_STEPS: [Step; 8] = [
    step("alice_setup", Party::Alice),
    step("bob_cosign_refund_a", Party::Bob),
    step("alice_commit", Party::Alice),
    step("bob_build_tx3", Party::Bob),
    step("alice_cosign_refund_b", Party::Alice),
    step("bob_commit", Party::Bob),
    step("alice_claim", Party::Alice),
    step("bob_claim", Party::Bob),
];

const P2P_STEPS: [Step; 3] =
    [step("alice_escrow", Party::Alice), step("bob_pay", Party::Bob), step("bob_claim_escrow", Party::Bob)];

const CHANNEL_STEPS: [Step; 4] = [
    step("add_htlc_a", Party::Alice),
    step("add_htlc_b", Party::Bob),
    step("fulfill_b", Party::Alice),
    step("fulfill_a", Party::Bob),
];

pub fn steps(engine: Engine) -> &'static [Step] {
    match engine {
        Engine::HtlcOnchain => &HTLC_STEPS,
        Engine::P2ptradex => &P2P_STEPS,
        Engine::ChannelOffchain => &CHANNEL_STEPS,
    }
}

/// What the adversary does to the schedule, by 1-based step index.
#[derive(Debug, Clone, Copy, Default)]
struct Plan {
    /// First step nobody initiates.
    stop_at: Option<usize>,
    /// Step whose co-signature is withheld, and by whom.
    refuse: Option<(usize, Party)>,
    delay: Option<(usize, u64)>,
    wrong_digest: bool,
}

fn plan(engine: Engine, strategy: AdversaryStrategy) -> Plan {
    let n = steps(engine).len();
    let mut p = Plan::default();
    match strategy {
        AdversaryStrategy::Honest => {}
        AdversaryStrategy::AbortAfterStep { k } => p.stop_at = (k < n).then_some(k + 1),
        AdversaryStrategy::DelayStep { k, dt } => p.delay = Some((k, dt)),
        AdversaryStrategy::WrongDigest => p.wrong_digest = true,
        AdversaryStrategy::RefuseCosign { which } => {
            p.refuse = Some(match (engine, which) {
                (Engine::ChannelOffchain, RefundSide::RefundA) => (1, Party::Bob),
                (Engine::ChannelOffchain, RefundSide::RefundB) => (2, Party::Alice),
                (_, RefundSide::RefundA) => (2, Party::Bob),
                (_, RefundSide::RefundB) => (5, Party::Alice),
            })
        }
        // Bob's first step that moves his own funds.
        AdversaryStrategy::Deny => {
            p.stop_at = Some(match engine {
                Engine::HtlcOnchain => 4,
                Engine::P2ptradex | Engine::ChannelOffchain => 2,
            })
        }
    }
    p
}

/// A digest nobody knows a preimage for.
fn decoy_digest(seed: u64) -> Digest {
    Digest(sha256(&[b"decoy", &seed.to_be_bytes()]))
}

struct Sim {
    world: World,
    a: ChainId,
    b: ChainId,
    alice: KeyPair,
    bob: KeyPair,
    events: Vec<TraceEvent>,
    /// Fee payer and step name for every transaction the run broadcast.
    sent: BTreeMap<TxId, (Party, &'static str)>,
    /// Fees paid, ordered alice_a, alice_b, bob_a, bob_b.
    fees: [u64; 4],
    deviator: Option<Party>,
}

enum Outcome {
    Done,
    /// Stopped before this step; the owner or refuser is the deviator.
    Stopped(Party),
}

impl Sim {
    fn new(sc: &Scenario) -> Result<Sim, RunError> {
        let alice = KeyPair::derive("alice", sc.seed);
        let bob = KeyPair::derive("bob", sc.seed);
        let mut keys = KeyRegistry::new();
        keys.register(&alice)?;
        keys.register(&bob)?;
        let mut world = World::new(keys);
        for c in [&sc.chain_a, &sc.chain_b] {
            let genesis: Vec<(PublicKey, Amount)> =
                [(alice.public(), c.alice), (bob.public(), c.bob)].into_iter().filter(|(_, a)| !a.is_zero()).collect();
            world.create_ledger(c.ledger_config(), &genesis)?;
        }
        Ok(Sim {
            world,
            a: sc.chain_a.id.clone(),
            b: sc.chain_b.id.clone(),
            alice,
            bob,
            events: Vec::new(),
            sent: BTreeMap::new(),
            fees: [0; 4],
            deviator: None,
        })
    }

    fn now(&self) -> SimTime {
        self.world.clock()
    }

    fn ledger(&self, chain: &ChainId) -> &Ledger {
        self.world.ledger(chain).expect("both chains exist")
    }

    fn pair(&mut self) -> (&mut Ledger, &mut Ledger) {
        let (a, b) = (self.a.clone(), self.b.clone());
        self.world.pair_mut(&a, &b).expect("both chains exist")
    }

    fn slot(&self, chain: &ChainId, p: Party) -> usize {
        let on_b = usize::from(*chain == self.b);
        match p {
            Party::Alice => on_b,
            Party::Bob => 2 + on_b,
        }
    }

    fn push(&mut self, e: TraceEvent) {
        self.events.push(e);
    }

    fn step_event(&mut self, kind: EventKind, s: &Step) -> TraceEvent {
        TraceEvent::new(self.now(), kind).step(s.name)
    }

    fn broadcast(&mut self, chain: &ChainId, id: TxId, payer: Party, step: &'static str) {
        self.sent.insert(id, (payer, step));
        let mut e = TraceEvent::new(self.now(), EventKind::Broadcast).on(chain).step(step).tx(id);
        e.payer = Some(payer);
        self.push(e);
    }

    fn advance(&mut self, dt: SimTime) {
        let now = self.now() + dt;
        let reports = self.world.advance(dt);
        let (alice, bob) = (self.alice.public(), self.bob.public());
        let mut batch = Vec::new();
        for (chain, report) in reports {
            let ledger = self.world.ledger(&chain).expect("reported chain exists");
            for id in &report.confirmed {
                let c = ledger.confirmed_tx(id).expect("just confirmed");
                let mut changes = Vec::new();
                for (party, key) in [(Party::Alice, alice), (Party::Bob, bob)] {
                    let gained: i128 =
                        c.tx.outputs.iter().filter(|o| o.condition.sole_owner() == Some(key)).map(|o| o.amount.signed()).sum();
                    let spent: i128 =
                        c.spent.iter().filter(|o| o.condition.sole_owner() == Some(key)).map(|o| o.amount.signed()).sum();
                    if gained != spent {
                        changes.push(BalanceChange { party, delta: gained - spent });
                    }
                }
                let mut e = TraceEvent::new(c.confirmed_at, EventKind::Confirm).on(&chain).tx(*id);
                if let Some((payer, step)) = self.sent.get(id) {
                    e.step = Some(step.to_string());
                    if !c.fee.is_zero() {
                        e.fee = Some(c.fee);
                        e.payer = Some(*payer);
                    }
                }
                e.changes = changes;
                batch.push(e);
                for p in c.tx.inputs.iter().flat_map(|i| i.witness.preimages.iter()) {
                    let mut r = TraceEvent::new(c.confirmed_at, EventKind::Reveal).on(&chain).tx(*id);
                    r.revealed_digest = Some(hash_commit(p));
                    batch.push(r);
                }
            }
            for id in &report.evicted {
                batch.push(TraceEvent::new(now, EventKind::Evict).on(&chain).tx(*id));
            }
        }
        batch.sort_by_key(|e| e.time);
        for e in &batch {
            if let (Some(fee), Some(p), Some(chain)) = (e.fee, e.payer, &e.chain) {
                let i = self.slot(chain, p);
                self.fees[i] += fee.0;
            }
        }
        self.events.extend(batch);
    }

    fn advance_to(&mut self, t: SimTime) {
        let now = self.now();
        if t > now {
            self.advance(t - now);
        }
    }

    fn delay_of(&self, chain: &ChainId) -> SimTime {
        self.ledger(chain).confirmation_delay()
    }

    /// Long enough for anything broadcast now to confirm on either chain.
    fn settle(&mut self) {
        let dt = self.delay_of(&self.a.clone()).max(self.delay_of(&self.b.clone()));
        self.advance(dt);
    }

    fn balances(&self) -> [Amount; 4] {
        let (a, b) = (self.ledger(&self.a), self.ledger(&self.b));
        [
            a.query_balance(&self.alice.public()),
            b.query_balance(&self.alice.public()),
            a.query_balance(&self.bob.public()),
            b.query_balance(&self.bob.public()),
        ]
    }

    /// Applies the plan's stop or refusal before step `idx`, and its delay.
    fn gate(&mut self, p: &Plan, idx: usize, s: &Step) -> Option<Party> {
        if let Some((k, dt)) = p.delay {
            if k == idx {
                self.advance(SimTime(dt));
            }
        }
        if let Some((k, who)) = p.refuse {
            if k == idx {
                let e = self.step_event(EventKind::Abort, s).detail(format!("{who:?} refuses to co-sign").to_lowercase());
                self.push(e);
                return Some(who);
            }
        }
        if p.stop_at == Some(idx) {
            let e = self.step_event(EventKind::Abort, s).detail("not initiated");
            self.push(e);
            return Some(s.owner);
        }
        None
    }

    fn failed(&mut self, s: &Step, err: impl std::fmt::Display) -> Party {
        let e = self.step_event(EventKind::StepFailed, s).detail(err.to_string());
        self.push(e);
        s.owner
    }
}

fn swap_params(sc: &Scenario, sim: &Sim) -> SwapParams {
    let mut p = SwapParams::new(
        sc.chain_a.id.clone(),
        sc.chain_b.id.clone(),
        sc.swap.n1,
        sc.swap.n2,
        sim.alice.clone(),
        sim.bob.clone(),
        sc.seed,
    );
    p.timelock_a = SimTime(sc.swap.timelock_a);
    p.timelock_b = SimTime(sc.swap.timelock_b);
    p.fee = sc.fee;
    p.claim_margin = sc.swap.claim_margin.map(SimTime);
    p
}

fn run_htlc(sim: &mut Sim, sc: &Scenario, plan: &Plan) -> Result<(), RunError> {
    let mut s = SwapSession::setup(swap_params(sc, sim), sim.ledger(&sim.a), sim.ledger(&sim.b))?;
    let mut ann = s.announcement();
    if plan.wrong_digest {
        ann.digest = decoy_digest(sc.seed);
    }
    let (chain_a, chain_b) = (sim.a.clone(), sim.b.clone());
    let mut outcome = Outcome::Done;
    for (i, st) in HTLC_STEPS.iter().enumerate() {
        let idx = i + 1;
        if let Some(who) = sim.gate(plan, idx, st) {
            outcome = Outcome::Stopped(who);
            break;
        }
        let (la, lb) = sim.pair();
        let sent = match idx {
            1 => Ok(None),
            2 => s.bob_cosign_refund_a().map(|_| None),
            3 => s.alice_commit(la).map(|id| Some((chain_a.clone(), id, Party::Alice))),
            4 => s.bob_build_tx3(la, lb, &ann).map(|_| None),
            5 => s.alice_cosign_refund_b().map(|_| None),
            6 => s.bob_commit(lb).map(|id| Some((chain_b.clone(), id, Party::Bob))),
            7 => s.alice_claim(lb).map(|id| Some((chain_b.clone(), id, Party::Alice))),
            _ => s.bob_claim(la, lb).map(|id| Some((chain_a.clone(), id, Party::Bob))),
        };
        match sent {
            Err(e) => {
                outcome = Outcome::Stopped(sim.failed(st, e));
                break;
            }
            Ok(b) => {
                let mut e = sim.step_event(EventKind::Step, st);
                e.phase = Some(s.phase().to_string());
                sim.push(e);
                if let Some((chain, id, payer)) = b {
                    sim.broadcast(&chain, id, payer, st.name);
                    let d = sim.delay_of(&chain);
                    sim.advance(d);
                }
            }
        }
    }
    if let Outcome::Stopped(who) = outcome {
        sim.deviator = Some(who);
    }
    if sc.adversary != AdversaryStrategy::Honest {
        recover_htlc(sim, &mut s);
    }
    if !s.tx1_broadcast() {
        s.abandon();
    }
    let (la, lb) = sim.pair();
    s.sync(la, lb);
    let mut e = TraceEvent::new(sim.now(), EventKind::Phase);
    e.phase = Some(s.phase().to_string());
    sim.push(e);
    Ok(())
}

/// Protective actions that need no cooperation.
fn recover_htlc(sim: &mut Sim, s: &mut SwapSession) {
    let (chain_a, chain_b) = (sim.a.clone(), sim.b.clone());
    sim.settle();
    if s.phase() == Phase::AliceClaimed {
        let (la, lb) = sim.pair();
        if let Ok(id) = s.bob_claim(la, lb) {
            sim.broadcast(&chain_a, id, Party::Bob, "bob_claim");
            sim.settle();
        }
    }
    if let Some(lb_time) = s.locktime_b().filter(|_| s.tx3_broadcast()) {
        sim.advance_to(lb_time);
        let (_, lb) = sim.pair();
        if let Ok(id) = s.refund_bob(lb) {
            sim.broadcast(&chain_b, id, Party::Bob, "refund_bob");
        }
        sim.settle();
    }
    if s.tx1_broadcast() {
        sim.advance_to(s.locktime_a());
        let (la, _) = sim.pair();
        if let Ok(id) = s.refund_alice(la) {
            sim.broadcast(&chain_a, id, Party::Alice, "refund_alice");
        }
    }
    let end = s.locktime_a().max(s.locktime_b().unwrap_or_default());
    sim.advance_to(end);
    sim.settle();
}

fn run_p2p(sim: &mut Sim, sc: &Scenario, plan: &Plan) -> Result<(), RunError> {
    let deadline = SimTime(sc.swap.proof_deadline.unwrap_or(sc.swap.timelock_a));
    let offer = TradeXOffer { alice_amount: sc.swap.n1, bob_amount: sc.swap.n2, proof_deadline: sim.now() + deadline };
    let mut s = TradeXSession::new(offer, sim.alice.clone(), sim.bob.clone(), sc.fee, sim.ledger(&sim.a), sim.ledger(&sim.b))?;
    let (chain_a, chain_b) = (sim.a.clone(), sim.b.clone());
    for (i, st) in P2P_STEPS.iter().enumerate() {
        if let Some(who) = sim.gate(plan, i + 1, st) {
            sim.deviator = Some(who);
            break;
        }
        let (la, lb) = sim.pair();
        let sent = match i + 1 {
            1 => s.alice_escrow(la).map(|id| (chain_a.clone(), id, Party::Alice)),
            2 => s.bob_pay(lb).map(|id| (chain_b.clone(), id, Party::Bob)),
            _ => s.bob_claim_escrow(la, lb).map(|id| (chain_a.clone(), id, Party::Bob)),
        };
        match sent {
            Err(e) => {
                sim.deviator = Some(sim.failed(st, e));
                break;
            }
            Ok((chain, id, payer)) => {
                let e = sim.step_event(EventKind::Step, st);
                sim.push(e);
                sim.broadcast(&chain, id, payer, st.name);
                let d = sim.delay_of(&chain);
                sim.advance(d);
            }
        }
    }
    if sc.adversary != AdversaryStrategy::Honest {
        sim.settle();
        if s.phase() == TradeXPhase::BobPaid {
            let (la, lb) = sim.pair();
            if let Ok(id) = s.bob_claim_escrow(la, lb) {
                sim.broadcast(&chain_a, id, Party::Bob, "bob_claim_escrow");
            }
        }
        sim.advance_to(offer.proof_deadline);
        sim.settle();
    }
    Ok(())
}

fn channel_event(sim: &mut Sim, ch: &Channel, step: &str) {
    let s = ch.state();
    let mut e = TraceEvent::new(sim.now(), EventKind::ChannelUpdate).on(ch.chain()).step(step).detail(format!(
        "balance_a={} balance_b={} pending={} capacity={}",
        s.balance_a.0,
        s.balance_b.0,
        s.pending_amount().0,
        ch.capacity().0
    ));
    e.state_seq = Some(s.seq);
    sim.push(e);
}

fn settlement_payer(ch: &Channel, fee: Amount) -> Party {
    if ch.state().balance_a >= fee {
        Party::Alice
    } else {
        Party::Bob
    }
}

fn run_channel(sim: &mut Sim, sc: &Scenario, plan: &Plan) -> Result<(), RunError> {
    let (n1, n2) = (sc.swap.n1, sc.swap.n2);
    let (chain_a, chain_b) = (sim.a.clone(), sim.b.clone());
    let (alice, bob) = (sim.alice.clone(), sim.bob.clone());
    let (la, lb) = sim.pair();
    let mut chan_a = open_channel(la, &alice, &bob, n1, Amount::ZERO, sc.fee)?;
    let mut chan_b = open_channel(lb, &alice, &bob, Amount::ZERO, n2, sc.fee)?;
    sim.broadcast(&chain_a, chan_a.funding_outpoint().tx_id, Party::Alice, "open_channel");
    sim.broadcast(&chain_b, chan_b.funding_outpoint().tx_id, Party::Bob, "open_channel");
    sim.settle();
    channel_event(sim, &chan_a, "open_channel");
    channel_event(sim, &chan_b, "open_channel");

    let x = gen_secret(sc.seed);
    let h = hash_commit(&x);
    let h_b = if plan.wrong_digest { decoy_digest(sc.seed) } else { h };
    let (ta, tb) = (SimTime(sc.swap.timelock_a), SimTime(sc.swap.timelock_b));
    let mut revealed = false;
    for (i, st) in CHANNEL_STEPS.iter().enumerate() {
        if let Some(who) = sim.gate(plan, i + 1, st) {
            sim.deviator = Some(who);
            break;
        }
        let now = sim.now();
        let res = match i + 1 {
            1 => chan_a.add_htlc(Side::A, h, n1, now + ta),
            2 => match chan_a.pending() {
                Some(p) if now + tb < p.expiry => chan_b.add_htlc(Side::B, h_b, n2, now + tb),
                _ => Err(ChannelError::Expired { now: now + tb, expiry: chan_a.pending().map_or(now, |p| p.expiry) }),
            },
            3 => chan_b.fulfill_htlc(&x, now),
            _ => chan_a.fulfill_htlc(&x, now),
        };
        match res {
            Err(e) => {
                sim.deviator = Some(sim.failed(st, e));
                break;
            }
            Ok(_) => {
                let e = sim.step_event(EventKind::Step, st);
                sim.push(e);
                let ch = if matches!(i + 1, 1 | 4) { &chan_a } else { &chan_b };
                channel_event(sim, &ch.clone(), st.name);
                if i + 1 == 3 {
                    revealed = true;
                    let mut r = TraceEvent::new(now, EventKind::Reveal).on(&chain_b);
                    r.revealed_digest = Some(h);
                    sim.push(r);
                }
            }
        }
    }
    if sc.adversary != AdversaryStrategy::Honest {
        if revealed && chan_a.pending().is_some() && chan_a.fulfill_htlc(&x, sim.now()).is_ok() {
            channel_event(sim, &chan_a.clone(), "fulfill_a");
        }
        let expiry = [chan_a.pending(), chan_b.pending()].iter().flatten().map(|p| p.expiry).max();
        if let Some(t) = expiry {
            sim.advance_to(t);
        }
        for ch in [&mut chan_a, &mut chan_b] {
            if ch.pending().is_some() {
                ch.fail_htlc(sim.now())?;
                let snapshot = ch.clone();
                channel_event(sim, &snapshot, "fail_htlc");
            }
        }
    }
    let payer_a = settlement_payer(&chan_a, sc.fee);
    let payer_b = settlement_payer(&chan_b, sc.fee);
    let (la, lb) = sim.pair();
    let close_a = chan_a.close_channel(la)?;
    let close_b = chan_b.close_channel(lb)?;
    sim.broadcast(&chain_a, close_a, payer_a, "close_channel");
    sim.broadcast(&chain_b, close_b, payer_b, "close_channel");
    sim.settle();
    Ok(())
}

/// Runs one scenario to completion and classifies the result.
pub fn run_scenario(sc: &Scenario) -> Result<ScenarioTrace, RunError> {
    let mut sim = Sim::new(sc)?;
    let initial = sim.balances();
    let p = plan(sc.engine, sc.adversary);
    match sc.engine {
        Engine::HtlcOnchain => run_htlc(&mut sim, sc, &p)?,
        Engine::P2ptradex => run_p2p(&mut sim, sc, &p)?,
        Engine::ChannelOffchain => run_channel(&mut sim, sc, &p)?,
    }
    let fin = sim.balances();
    let slots = [(Party::Alice, &sim.a), (Party::Alice, &sim.b), (Party::Bob, &sim.a), (Party::Bob, &sim.b)];
    let balances: Vec<BalanceRecord> = slots
        .iter()
        .enumerate()
        .map(|(i, (party, chain))| BalanceRecord {
            party: *party,
            chain: (*chain).clone(),
            initial: initial[i],
            final_: fin[i],
            fees_paid: Amount(sim.fees[i]),
        })
        .collect();
    let mut trace = ScenarioTrace {
        engine: sc.engine,
        strategy: sc.adversary,
        seed: sc.seed,
        n1: sc.swap.n1,
        n2: sc.swap.n2,
        events: sim.events,
        balances,
        deviator: sim.deviator,
        incentives: IncentiveLedger::open(sc.swap.n1, sc.swap.n2)?,
        verdict: crate::harness::Verdict::BothRefunded,
    };
    trace.verdict = check_atomicity(&trace.deltas(), &trace.fees(), sc.swap.n1, sc.swap.n2);
    // A swap that completed through the other side's reaction has no deviator.
    if trace.verdict == crate::harness::Verdict::SwapCompleted {
        trace.deviator = None;
    }
    for party in [Party::Alice, Party::Bob] {
        trace.incentives.charge_spam_fee(party, sc.spam_fee)?;
    }
    trace.incentives.settle(&trace.verdict, trace.deviator);
    Ok(trace)
}

/// Every strategy the sweep runs for `sc.engine`: each abort point, plus
/// co-sign refusals, a wrong digest, Bob denying, and for the on-chain
/// engine Alice claiming at the last safe instant and one second after.
pub fn sweep_strategies(sc: &Scenario) -> Vec<AdversaryStrategy> {
    let n = steps(sc.engine).len();
    let mut out: Vec<AdversaryStrategy> = (0..=n).map(|k| AdversaryStrategy::AbortAfterStep { k }).collect();
    if sc.engine != Engine::P2ptradex {
        out.push(AdversaryStrategy::RefuseCosign { which: RefundSide::RefundA });
        out.push(AdversaryStrategy::RefuseCosign { which: RefundSide::RefundB });
        out.push(AdversaryStrategy::WrongDigest);
    }
    out.push(AdversaryStrategy::Deny);
    if sc.engine == Engine::HtlcOnchain {
        let dt = last_safe_claim_delay(sc);
        out.push(AdversaryStrategy::DelayStep { k: 7, dt });
        out.push(AdversaryStrategy::DelayStep { k: 7, dt: dt + 1 });
    }
    out
}

/// How long Alice can sit on her claim in the honest schedule and still
/// claim at the deadline: TX3 confirms `d_b` after TX1 does, and the
/// deadline is `timelock_b - margin_b` after TX3's broadcast.
pub fn last_safe_claim_delay(sc: &Scenario) -> u64 {
    let d_b = sc.chain_b.confirmation_delay;
    let m_b = sc.swap.claim_margin.unwrap_or(2 * d_b);
    sc.swap.timelock_b.saturating_sub(m_b).saturating_sub(d_b)
}

/// Runs every sweep strategy, in parallel, keeping the strategy order.
pub fn enumerate_abort_points(sc: &Scenario) -> Result<Vec<(AdversaryStrategy, ScenarioTrace)>, RunError> {
    sweep_strategies(sc).into_par_iter().map(|st| run_scenario(&sc.clone().with_adversary(st)).map(|t| (st, t))).collect()
}

/// The same offer under the baseline and the HTLC engine, honest and with
/// Bob denying: baseline honest, baseline deny, HTLC honest, HTLC deny.
pub fn compare_baselines(sc: &Scenario) -> Result<Vec<ScenarioTrace>, RunError> {
    let mut out = Vec::new();
    for engine in [Engine::P2ptradex, Engine::HtlcOnchain] {
        for st in [AdversaryStrategy::Honest, AdversaryStrategy::Deny] {
            out.push(run_scenario(&sc.clone().with_engine(engine).with_adversary(st))?);
        }
    }
    Ok(out)
}
