//! Ready-made simulation runs with their property checks applied.
//!
//! Every run is a pure function of its arguments; the returned `hash` is the
//! trace hash, so two calls with the same arguments must report the same one.

use std::collections::{BTreeMap, BTreeSet};

use at2_core::{AccountId, Amount, ProcessId, Transfer, TransferMessage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adversary::{DetEquivocator, EReadyAttacker, PcbEquivocator};
use crate::check::{all_equal, conflicting_applications, contiguous_outgoing, source_order};
use crate::det::DetBroadcast;
use crate::mp::{account_of, outgoing_seqs, At2, At2Input, At2Output};
use crate::prob::{GossipNode, Instance, ProbBroadcast, ProbParams};
use crate::secure::{BcastEvent, BroadcastNode, SecureBroadcast};
use crate::sim::{Adversary, Crash, SimConfig, SimError, Simulation, StopReason};

/// The highest `count` ids of `0..n`.
pub fn top_ids(n: usize, count: usize) -> BTreeSet<ProcessId> {
    (n.saturating_sub(count)..n).map(|i| ProcessId(i as u32)).collect()
}

/// The largest Byzantine count strictly below n/3.
pub fn max_byzantine(n: usize) -> usize {
    n.saturating_sub(1) / 3
}

/// ⌊f·n⌋.
pub fn byzantine_count(n: usize, f: f64) -> usize {
    (f * n as f64 + 1e-9).floor() as usize
}

/// Random transfer scripts for the correct processes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Workload {
    pub initial_max: Amount,
    pub transfers: usize,
    pub amount_max: Amount,
}

impl Default for Workload {
    fn default() -> Self {
        Workload {
            initial_max: 10,
            transfers: 3,
            amount_max: 6,
        }
    }
}

pub type Scripts = BTreeMap<ProcessId, Vec<(AccountId, Amount)>>;

impl Workload {
    /// Initial balances for every account and a script per correct process.
    /// Byzantine accounts start with `initial_max`.
    pub fn generate(&self, cfg: &SimConfig) -> (BTreeMap<AccountId, Amount>, Scripts) {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(1);
        let n = cfg.n as u32;
        let initial = (0..n)
            .map(|a| {
                let q0 = if cfg.byzantine.contains(&ProcessId(a)) {
                    self.initial_max
                } else {
                    rng.random_range(0..=self.initial_max)
                };
                (AccountId(a), q0)
            })
            .collect();
        let scripts = cfg
            .correct()
            .map(|p| {
                let script = (0..self.transfers)
                    .map(|_| {
                        let mut dest = rng.random_range(0..n);
                        if n > 1 && dest == p.0 {
                            dest = (dest + 1) % n;
                        }
                        (AccountId(dest), rng.random_range(1..=self.amount_max.max(1)))
                    })
                    .collect();
                (p, script)
            })
            .collect();
        (initial, scripts)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct At2Report {
    pub hash: String,
    pub stop: StopReason,
    pub events: u64,
    pub messages: u64,
    /// Conflicting `(source, seq)` pairs applied by correct processes.
    pub conflicts: usize,
    /// Some correct process saw a negative balance at some step.
    pub negative_balance: bool,
    /// All correct processes ended with the same `hist`.
    pub hist_agree: bool,
    /// Every transfer invoked by a correct process resolved.
    pub all_resolved: bool,
    /// Every correct process holds each source's transfers as `1..=k`.
    pub issue_order: bool,
    /// Final `read` of every account, per correct process.
    pub balances: BTreeMap<ProcessId, BTreeMap<AccountId, i128>>,
    /// Successful and failed transfers, per correct process.
    pub resolutions: BTreeMap<ProcessId, (u64, u64)>,
    /// Transfers applied, per correct process.
    pub applied: BTreeMap<ProcessId, usize>,
}

impl At2Report {
    pub fn safe(&self) -> bool {
        self.conflicts == 0 && !self.negative_balance && self.issue_order
    }

    pub fn ok(&self) -> bool {
        self.safe() && self.hist_agree && self.all_resolved && self.stop == StopReason::Quiescent
    }
}

/// Runs the transfer engine over `layer` with the given scripts.
pub fn run_at2<B, A, F>(
    cfg: SimConfig,
    layer: F,
    adversary: A,
    initial: BTreeMap<AccountId, Amount>,
    scripts: Scripts,
) -> Result<At2Report, SimError>
where
    B: SecureBroadcast<Payload = TransferMessage>,
    A: Adversary<At2<B>>,
    F: Fn(ProcessId) -> B,
{
    let accounts: Vec<AccountId> = (0..cfg.n as u32).map(AccountId).collect();
    let correct: Vec<ProcessId> = cfg.correct().collect();
    let mut sim = Simulation::new(cfg, |p| At2::new(p, layer(p), initial.clone()), adversary)?;
    for (p, script) in scripts {
        sim.schedule_input(0, p, At2Input::Script(script))?;
    }
    let mut negative = false;
    let trace = sim.run_observed(|_, p, node: &At2<B>| {
        if node.read(account_of(p)) < 0 || node.hist().keys().any(|&a| node.hist_balance(a) < 0) {
            negative = true;
        }
    })?;

    let applied: Vec<(ProcessId, &Transfer)> = trace
        .outputs
        .iter()
        .filter_map(|(_, p, o)| match o {
            At2Output::Applied(t) => Some((*p, t)),
            _ => None,
        })
        .collect();
    let conflicts = conflicting_applications(applied.iter().copied()).len();
    let nodes: Vec<(ProcessId, &At2<B>)> = trace.correct_nodes().collect();
    let hists: Vec<_> = nodes.iter().map(|(_, n)| n.hist()).collect();
    let seqs: Vec<Vec<u64>> = nodes
        .iter()
        .flat_map(|(_, n)| correct.iter().map(|&q| outgoing_seqs(n, q)))
        .collect();
    let mut resolutions = BTreeMap::new();
    for (_, p, o) in &trace.outputs {
        if let At2Output::Resolved { success, .. } = o {
            let e: &mut (u64, u64) = resolutions.entry(*p).or_default();
            if *success {
                e.0 += 1;
            } else {
                e.1 += 1;
            }
        }
    }
    Ok(At2Report {
        hash: trace.hash_hex(),
        stop: trace.stop,
        events: trace.events,
        messages: trace.messages,
        conflicts,
        negative_balance: negative,
        hist_agree: all_equal(&hists),
        all_resolved: nodes.iter().all(|(_, n)| n.is_settled()),
        issue_order: contiguous_outgoing(seqs.iter().map(Vec::as_slice)),
        balances: nodes
            .iter()
            .map(|(p, n)| (*p, accounts.iter().map(|&a| (a, n.read(a))).collect()))
            .collect(),
        resolutions,
        applied: nodes
            .iter()
            .map(|(p, _)| (*p, applied.iter().filter(|(q, _)| q == p).count()))
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attack {
    /// Byzantine processes stay silent.
    Crash,
    /// The lowest Byzantine id double-spends its whole balance.
    Equivocate,
}

impl std::str::FromStr for Attack {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        match s {
            "crash" | "none" => Ok(Attack::Crash),
            "equivocate" => Ok(Attack::Equivocate),
            _ => Err(SimError::Config(format!("unknown adversary {s:?}"))),
        }
    }
}

/// Two double-spends by `b`: its whole balance to `c1` or to `c2` at seq 1,
/// and the crossed pair at seq 2.
fn double_spends(b: ProcessId, q0: Amount, c1: ProcessId, c2: ProcessId) -> Vec<(TransferMessage, TransferMessage)> {
    let a = account_of(b);
    let msg = |dest: ProcessId, seq| TransferMessage::new(Transfer::new(a, account_of(dest), q0, seq), BTreeSet::new());
    vec![(msg(c1, 1), msg(c2, 1)), (msg(c2, 2), msg(c1, 2))]
}

fn equivocation_targets(cfg: &SimConfig) -> Option<(ProcessId, ProcessId, ProcessId)> {
    let b = *cfg.byzantine.iter().next()?;
    let mut correct = cfg.correct();
    let c1 = correct.next()?;
    let c2 = correct.next().unwrap_or(c1);
    Some((b, c1, c2))
}

/// The transfer system over deterministic secure broadcast.
pub fn run_at2d(cfg: SimConfig, attack: Attack, workload: Workload) -> Result<At2Report, SimError> {
    let (initial, scripts) = workload.generate(&cfg);
    let n = cfg.n;
    let layer = |_| DetBroadcast::new(n);
    match (attack, equivocation_targets(&cfg)) {
        (Attack::Equivocate, Some((b, c1, c2))) => {
            let adv = DetEquivocator::new(b, double_spends(b, initial[&account_of(b)], c1, c2));
            run_at2(cfg, layer, adv, initial, scripts)
        }
        _ => run_at2(cfg, layer, Crash, initial, scripts),
    }
}

/// The transfer system over sequenced probabilistic double echo.
pub fn run_at2p(cfg: SimConfig, params: ProbParams, attack: Attack, workload: Workload) -> Result<At2Report, SimError> {
    params.validate()?;
    let (initial, scripts) = workload.generate(&cfg);
    let everyone: Vec<ProcessId> = (0..cfg.n as u32).map(ProcessId).collect();
    let layer = |_| ProbBroadcast::new(params, everyone.clone());
    match (attack, equivocation_targets(&cfg)) {
        (Attack::Equivocate, Some((b, c1, c2))) => {
            let pair = double_spends(b, initial[&account_of(b)], c1, c2).swap_remove(0);
            let adv = PcbEquivocator::new(Instance { sender: b, index: 0 }, pair.0, pair.1);
            run_at2(cfg, layer, adv, initial, scripts)
        }
        _ => run_at2(cfg, layer, Crash, initial, scripts),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BcastReport {
    pub hash: String,
    pub stop: StopReason,
    pub source_order: bool,
    /// All correct processes delivered the same sequences.
    pub agreement: bool,
    /// Every correct sender delivered all of its own broadcasts.
    pub validity: bool,
    /// No correct process delivered a `(source, seq)` twice.
    pub no_duplication: bool,
    /// Every payload delivered from a correct source was broadcast by it.
    pub integrity: bool,
    /// Deliveries per correct process.
    pub deliveries: BTreeMap<ProcessId, usize>,
}

/// Deterministic secure broadcast alone: every correct process broadcasts
/// `per_sender` payloads (`1000·p + i`). Under `Attack::Equivocate` the lowest
/// Byzantine id equivocates on two sequence numbers.
pub fn run_det_broadcast(cfg: SimConfig, attack: Attack, per_sender: usize) -> Result<BcastReport, SimError> {
    let n = cfg.n;
    let correct: Vec<ProcessId> = cfg.correct().collect();
    let payload = |p: ProcessId, i: usize| 1000 * p.0 as u64 + i as u64;
    let make = |_| BroadcastNode::new(DetBroadcast::<u64>::new(n));
    let mut sim_inputs = Vec::new();
    for &p in &correct {
        for i in 0..per_sender {
            sim_inputs.push((i as u64, p, payload(p, i)));
        }
    }
    macro_rules! go {
        ($adv:expr) => {{
            let mut sim = Simulation::new(cfg.clone(), make, $adv)?;
            for &(at, p, v) in &sim_inputs {
                sim.schedule_input(at, p, v)?;
            }
            sim.run()?
        }};
    }
    let trace = match (attack, cfg.byzantine.iter().next()) {
        (Attack::Equivocate, Some(&b)) => {
            let v = |k: u64| (1_000_000 + 10 * k, 2_000_000 + 10 * k);
            go!(DetEquivocator::new(b, vec![v(1), v(2)]))
        }
        _ => go!(Crash),
    };

    let logs: Vec<&BTreeMap<ProcessId, Vec<u64>>> =
        trace.correct_nodes().map(|(_, n)| n.layer.delivered()).collect();
    let mut no_dup = true;
    let mut deliveries = BTreeMap::new();
    for &p in &correct {
        let mut seen = BTreeSet::new();
        for o in trace.outputs_of(p) {
            if let BcastEvent::Deliver { source, seq, .. } = o {
                no_dup &= seen.insert((*source, *seq));
            }
        }
        deliveries.insert(p, seen.len());
    }
    let integrity = logs.iter().all(|l| {
        correct.iter().all(|&s| {
            l.get(&s)
                .map_or(true, |v| v.iter().enumerate().all(|(i, &x)| x == payload(s, i)))
        })
    });
    let validity = trace
        .correct_nodes()
        .all(|(p, n)| n.layer.delivered_from(p).len() == per_sender);
    Ok(BcastReport {
        hash: trace.hash_hex(),
        stop: trace.stop,
        source_order: source_order(&logs),
        agreement: all_equal(&logs),
        validity,
        no_duplication: no_dup,
        integrity,
        deliveries,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GossipReport {
    pub hash: String,
    pub correct: usize,
    pub delivered: usize,
}

impl GossipReport {
    /// Some correct process delivered but not all of them did.
    pub fn totality_violated(&self) -> bool {
        self.delivered > 0 && self.delivered < self.correct
    }
}

/// One gossip instance from correct sender 0, with the top ⌊f·n⌋ ids
/// crashed.
pub fn run_gossip(n: usize, f: f64, g: f64, seed: u64) -> Result<GossipReport, SimError> {
    let cfg = SimConfig::new(n, seed).with_byzantine(top_ids(n, byzantine_count(n, f)));
    let correct = cfg.correct().count();
    let mut sim = Simulation::new(cfg, |_| GossipNode::<u64>::new(ProcessId(0), g), Crash)?;
    sim.schedule_input(0, ProcessId(0), 7)?;
    let trace = sim.run()?;
    let delivered = trace
        .correct_nodes()
        .filter(|(_, n)| n.gossip().and_then(|g| g.delivered()).is_some())
        .count();
    Ok(GossipReport {
        hash: trace.hash_hex(),
        correct,
        delivered,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcbAttack {
    /// Correct sender 0; Byzantine processes crash.
    None,
    /// Byzantine sender splitting the correct processes between two messages.
    Equivocate,
    /// Byzantine sender feeding one more correct process per round.
    EReady,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PcbReport {
    pub hash: String,
    pub correct: usize,
    /// How many correct processes delivered each message.
    pub delivered: BTreeMap<u64, usize>,
    /// The sender's own delivery, if the sender is correct.
    pub sender_delivered: Option<bool>,
}

impl PcbReport {
    pub fn delivering(&self) -> usize {
        self.delivered.values().sum()
    }

    pub fn consistency_violated(&self) -> bool {
        self.delivered.len() > 1
    }

    pub fn totality_violated(&self) -> bool {
        let d = self.delivering();
        d > 0 && d < self.correct
    }

    pub fn validity_violated(&self) -> bool {
        self.sender_delivered == Some(false)
    }
}

/// One double-echo instance (index 0 of a single sender).
pub fn run_pcb(n: usize, f: f64, params: ProbParams, seed: u64, attack: PcbAttack) -> Result<PcbReport, SimError> {
    params.validate()?;
    let byz = top_ids(n, byzantine_count(n, f));
    let sender = match attack {
        PcbAttack::None => ProcessId(0),
        _ => *byz
            .iter()
            .next()
            .ok_or_else(|| SimError::Config("a Byzantine sender needs f > 0".into()))?,
    };
    let cfg = SimConfig::new(n, seed).with_byzantine(byz);
    let correct = cfg.correct().count();
    let inst = Instance { sender, index: 0 };
    let make = |_| BroadcastNode::new(ProbBroadcast::<u64>::new(params, vec![sender]));
    let trace = match attack {
        PcbAttack::None => {
            let mut sim = Simulation::new(cfg, make, Crash)?;
            sim.schedule_input(0, sender, 1)?;
            sim.run()?
        }
        PcbAttack::Equivocate => Simulation::new(cfg, make, PcbEquivocator::new(inst, 1, 2))?.run()?,
        PcbAttack::EReady => Simulation::new(cfg, make, EReadyAttacker::new(inst, 1))?.run()?,
    };
    let mut delivered = BTreeMap::new();
    let mut sender_delivered = None;
    for (p, node) in trace.correct_nodes() {
        let got = node.layer.sequencer(sender).and_then(|s| s.instance(0)).and_then(|i| i.delivered());
        if let Some(&m) = got {
            *delivered.entry(m).or_default() += 1;
        }
        if p == sender {
            sender_delivered = Some(got.is_some());
        }
    }
    Ok(PcbReport {
        hash: trace.hash_hex(),
        correct,
        delivered,
        sender_delivered,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PsbReport {
    pub hash: String,
    /// Every correct process delivered all `count` messages.
    pub full: bool,
    /// Delivered sequences are prefixes of one another.
    pub consistent: bool,
    /// Delivered sequences, per correct process.
    pub sequences: BTreeMap<ProcessId, Vec<u64>>,
}

/// Correct sender 0 broadcasts `count` messages `0..count`, one per time unit.
pub fn run_psb(n: usize, params: ProbParams, seed: u64, count: usize) -> Result<PsbReport, SimError> {
    params.validate()?;
    let sender = ProcessId(0);
    let make = |_| BroadcastNode::new(ProbBroadcast::<u64>::new(params, vec![sender]));
    let mut sim = Simulation::new(SimConfig::new(n, seed), make, Crash)?;
    for i in 0..count {
        sim.schedule_input(i as u64, sender, i as u64)?;
    }
    let trace = sim.run()?;
    let sequences: BTreeMap<ProcessId, Vec<u64>> = trace
        .correct_nodes()
        .map(|(p, node)| (p, node.layer.delivered_from(sender).to_vec()))
        .collect();
    let logs: Vec<BTreeMap<ProcessId, Vec<u64>>> =
        sequences.values().map(|s| [(sender, s.clone())].into()).collect();
    let expected: Vec<u64> = (0..count as u64).collect();
    Ok(PsbReport {
        hash: trace.hash_hex(),
        full: sequences.values().all(|s| *s == expected),
        consistent: source_order(&logs.iter().collect::<Vec<_>>()),
        sequences,
    })
}
