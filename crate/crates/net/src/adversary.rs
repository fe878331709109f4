//! Byzantine strategies used by the test suites and the CLI.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Debug;
use std::hash::Hash;

use at2_core::ProcessId;
use rand::seq::SliceRandom;

use crate::auth::Signature;
use crate::det::{ack_statement, initial_statement, quorum, DetMsg};
use crate::mp::At2Output;
use crate::prob::{content_statement, Instance, ProbMsg, ProbNote};
use crate::secure::BcastEvent;
use crate::sim::{AdvCtx, Adversary, Protocol};

/// A Byzantine sender that signs two different payloads for the same
/// sequence number and shows each version to half of the correct processes.
///
/// Every Byzantine process acknowledges both versions. Whenever either version
/// collects a quorum of valid ACKs the sender floods its proof, so the attack
/// succeeds exactly when quorum intersection fails.
#[derive(Debug, Clone)]
pub struct DetEquivocator<P> {
    sender: ProcessId,
    /// Version pairs for sequence numbers 1, 2, ...
    versions: Vec<(P, P)>,
    acks: BTreeMap<(u64, usize), BTreeMap<ProcessId, Signature>>,
    proven: BTreeSet<(u64, usize)>,
    /// Whether colluders acknowledge broadcasts of correct processes.
    pub ack_others: bool,
}

impl<P> DetEquivocator<P> {
    pub fn new(sender: ProcessId, versions: Vec<(P, P)>) -> Self {
        DetEquivocator {
            sender,
            versions,
            acks: BTreeMap::new(),
            proven: BTreeSet::new(),
            ack_others: false,
        }
    }

    /// Versions that reached a quorum, as (seq, version index).
    pub fn proofs(&self) -> &BTreeSet<(u64, usize)> {
        &self.proven
    }
}

impl<P: Clone + Debug + Hash + Eq> DetEquivocator<P> {
    fn version(&self, seq: u64, idx: usize) -> &P {
        let pair = &self.versions[(seq - 1) as usize];
        if idx == 0 {
            &pair.0
        } else {
            &pair.1
        }
    }

    fn record_ack(&mut self, ctx: &mut AdvCtx<'_, DetMsg<P>>, seq: u64, idx: usize, from: ProcessId, sig: Signature) {
        let entry = self.acks.entry((seq, idx)).or_default();
        entry.insert(from, sig);
        if entry.len() >= quorum(ctx.n()) && self.proven.insert((seq, idx)) {
            let payload = self.version(seq, idx).clone();
            let sender_sig = ctx
                .sign(self.sender, &initial_statement(self.sender, seq, &payload))
                .expect("sender is Byzantine");
            let proof = DetMsg::Proof {
                sender: self.sender,
                seq,
                payload,
                sender_sig,
                acks: self.acks[&(seq, idx)].values().copied().collect(),
            };
            for q in ctx.correct() {
                ctx.send(self.sender, q, proof.clone()).expect("sender is Byzantine");
            }
        }
    }
}

impl<P, Pr> Adversary<Pr> for DetEquivocator<P>
where
    P: Clone + Debug + Hash + Eq,
    Pr: Protocol<Msg = DetMsg<P>>,
{
    fn on_start(&mut self, ctx: &mut AdvCtx<'_, DetMsg<P>>) {
        let mut correct = ctx.correct();
        correct.shuffle(ctx.rng());
        let half = correct.len() / 2;
        let byz: Vec<ProcessId> = ctx.byzantine().iter().copied().collect();
        for seq in 1..=self.versions.len() as u64 {
            for idx in 0..2 {
                let payload = self.version(seq, idx).clone();
                let sig = ctx
                    .sign(self.sender, &initial_statement(self.sender, seq, &payload))
                    .expect("sender is Byzantine");
                let targets = if idx == 0 { &correct[..half] } else { &correct[half..] };
                for &q in targets {
                    let msg = DetMsg::Initial {
                        sender: self.sender,
                        seq,
                        payload: payload.clone(),
                        sig,
                    };
                    ctx.send(self.sender, q, msg).expect("sender is Byzantine");
                }
                for &z in &byz {
                    let ack = ctx
                        .sign(z, &ack_statement(self.sender, seq, &payload))
                        .expect("colluder is Byzantine");
                    self.record_ack(ctx, seq, idx, z, ack);
                }
            }
        }
    }

    fn on_message(&mut self, ctx: &mut AdvCtx<'_, DetMsg<P>>, to: ProcessId, from: ProcessId, msg: DetMsg<P>) {
        match msg {
            DetMsg::Ack {
                sender,
                seq,
                payload,
                sig,
            } if to == self.sender && sender == self.sender => {
                if seq == 0 || seq as usize > self.versions.len() {
                    return;
                }
                if !ctx.verify(from, &ack_statement(sender, seq, &payload), &sig) {
                    return;
                }
                let idx = if *self.version(seq, 0) == payload {
                    0
                } else if *self.version(seq, 1) == payload {
                    1
                } else {
                    return;
                };
                self.record_ack(ctx, seq, idx, from, sig);
            }
            DetMsg::Initial {
                sender,
                seq,
                payload,
                sig,
            } if self.ack_others && !ctx.byzantine().contains(&sender) => {
                if ctx.verify(sender, &initial_statement(sender, seq, &payload), &sig) {
                    let ack = ctx.sign(to, &ack_statement(sender, seq, &payload)).expect("to is Byzantine");
                    let _ = ctx.send(
                        to,
                        sender,
                        DetMsg::Ack {
                            sender,
                            seq,
                            payload,
                            sig: ack,
                        },
                    );
                }
            }
            _ => {}
        }
    }
}

/// Outputs from which an observer can tell that a correct process delivered
/// or became ready for a probabilistic broadcast instance.
pub trait ProbObservable {
    fn pcb_delivery(&self) -> Option<Instance>;
    fn ready(&self) -> Option<Instance>;
}

impl<P> ProbObservable for BcastEvent<P, ProbNote<P>> {
    fn pcb_delivery(&self) -> Option<Instance> {
        match self {
            BcastEvent::Note(ProbNote::PcbDeliver { inst, .. }) => Some(*inst),
            _ => None,
        }
    }

    fn ready(&self) -> Option<Instance> {
        match self {
            BcastEvent::Note(ProbNote::Ready { inst, .. }) => Some(*inst),
            _ => None,
        }
    }
}

impl<P> ProbObservable for At2Output<ProbNote<P>> {
    fn pcb_delivery(&self) -> Option<Instance> {
        match self {
            At2Output::Note(ProbNote::PcbDeliver { inst, .. }) => Some(*inst),
            _ => None,
        }
    }

    fn ready(&self) -> Option<Instance> {
        match self {
            At2Output::Note(ProbNote::Ready { inst, .. }) => Some(*inst),
            _ => None,
        }
    }
}

/// A Byzantine sender that splits the correct processes into two camps and
/// pushes a different message into each.
///
/// The sender gossips `m1` to one camp and `m2` to the other over fast links.
/// Every Byzantine process then answers each correct subscriber with Gossip,
/// Echo and Ready messages for that subscriber's camp, so Byzantine echoes
/// help both camps toward their echo thresholds and Byzantine readies seed
/// ready feedback for both messages.
#[derive(Debug, Clone)]
pub struct PcbEquivocator<P> {
    inst: Instance,
    messages: [P; 2],
    /// Fraction of correct processes in the `m1` camp.
    pub split: f64,
    /// Delay of every Byzantine send.
    pub fast: u64,
    camp: BTreeMap<ProcessId, usize>,
}

impl<P> PcbEquivocator<P> {
    pub fn new(inst: Instance, m1: P, m2: P) -> Self {
        PcbEquivocator {
            inst,
            messages: [m1, m2],
            split: 0.5,
            fast: 1,
            camp: BTreeMap::new(),
        }
    }
}

impl<P, Pr> Adversary<Pr> for PcbEquivocator<P>
where
    P: Clone + Debug + Hash + Eq,
    Pr: Protocol<Msg = ProbMsg<P>>,
{
    fn on_start(&mut self, ctx: &mut AdvCtx<'_, ProbMsg<P>>) {
        let mut correct = ctx.correct();
        correct.shuffle(ctx.rng());
        let cut = (correct.len() as f64 * self.split).round() as usize;
        for (i, &q) in correct.iter().enumerate() {
            let c = usize::from(i >= cut);
            self.camp.insert(q, c);
            let payload = self.messages[c].clone();
            let sig = ctx
                .sign(self.inst.sender, &content_statement(self.inst, &payload))
                .expect("sender is Byzantine");
            let msg = ProbMsg::Gossip {
                inst: self.inst,
                payload,
                sig,
            };
            ctx.send_delayed(self.inst.sender, q, msg, self.fast)
                .expect("sender is Byzantine");
        }
    }

    fn on_message(&mut self, ctx: &mut AdvCtx<'_, ProbMsg<P>>, to: ProcessId, from: ProcessId, msg: ProbMsg<P>) {
        if msg.instance() != self.inst {
            return;
        }
        let Some(&c) = self.camp.get(&from) else { return };
        let payload = self.messages[c].clone();
        let sig = ctx
            .sign(self.inst.sender, &content_statement(self.inst, &payload))
            .expect("sender is Byzantine");
        let inst = self.inst;
        let reply = match msg {
            ProbMsg::GossipSubscribe { .. } => ProbMsg::Gossip { inst, payload, sig },
            ProbMsg::EchoSubscribe { .. } => ProbMsg::Echo { inst, payload, sig },
            ProbMsg::ReadySubscribe { .. } => ProbMsg::Ready { inst, payload, sig },
            _ => return,
        };
        let _ = ctx.send_delayed(to, from, reply, self.fast);
    }
}

/// A Byzantine sender that hands its message to one more correct process
/// per round, with Byzantine echoes and readies backing it, and stops as
/// soon as it observes any correct process deliver.
///
/// This adversary relies on seeing outputs of correct processes, the
/// delivery-observation power granted in the totality analysis.
#[derive(Debug, Clone)]
pub struct EReadyAttacker<P> {
    inst: Instance,
    message: P,
    /// Time between rounds.
    pub period: u64,
    order: Vec<ProcessId>,
    reached: usize,
    stopped: bool,
    any_ready: bool,
    held: Vec<(ProcessId, ProcessId)>,
}

impl<P> EReadyAttacker<P> {
    pub fn new(inst: Instance, message: P) -> Self {
        EReadyAttacker {
            inst,
            message,
            period: 50,
            order: Vec::new(),
            reached: 0,
            stopped: false,
            any_ready: false,
            held: Vec::new(),
        }
    }

    /// Correct processes handed the message before the attack stopped.
    pub fn rounds(&self) -> usize {
        self.reached
    }
}

impl<P: Clone + Debug + Hash + Eq> EReadyAttacker<P> {
    fn signed(&self, ctx: &AdvCtx<'_, ProbMsg<P>>) -> Signature {
        ctx.sign(self.inst.sender, &content_statement(self.inst, &self.message))
            .expect("sender is Byzantine")
    }

    fn round(&mut self, ctx: &mut AdvCtx<'_, ProbMsg<P>>) {
        if self.stopped || self.reached >= self.order.len() {
            return;
        }
        let q = self.order[self.reached];
        self.reached += 1;
        let sig = self.signed(ctx);
        let msg = ProbMsg::Gossip {
            inst: self.inst,
            payload: self.message.clone(),
            sig,
        };
        let _ = ctx.send_delayed(self.inst.sender, q, msg, 1);
        ctx.wake_after(self.period, 0);
    }
}

impl<P, Pr> Adversary<Pr> for EReadyAttacker<P>
where
    P: Clone + Debug + Hash + Eq,
    Pr: Protocol<Msg = ProbMsg<P>>,
    Pr::Output: ProbObservable,
{
    fn on_start(&mut self, ctx: &mut AdvCtx<'_, ProbMsg<P>>) {
        self.order = ctx.correct();
        self.order.shuffle(ctx.rng());
        self.round(ctx);
    }

    fn on_message(&mut self, ctx: &mut AdvCtx<'_, ProbMsg<P>>, to: ProcessId, from: ProcessId, msg: ProbMsg<P>) {
        if msg.instance() != self.inst || self.stopped {
            return;
        }
        let sig = self.signed(ctx);
        let inst = self.inst;
        let payload = self.message.clone();
        match msg {
            ProbMsg::EchoSubscribe { .. } => {
                let _ = ctx.send_delayed(to, from, ProbMsg::Echo { inst, payload, sig }, 1);
            }
            ProbMsg::ReadySubscribe { .. } => {
                // Readies are held back until the first correct process is
                // ready, so they add feedback without creating it.
                if self.any_ready {
                    let _ = ctx.send_delayed(to, from, ProbMsg::Ready { inst, payload, sig }, 1);
                } else {
                    self.held.push((to, from));
                }
            }
            _ => {}
        }
    }

    fn on_output(&mut self, ctx: &mut AdvCtx<'_, ProbMsg<P>>, _who: ProcessId, out: &Pr::Output) {
        if out.pcb_delivery() == Some(self.inst) {
            self.stopped = true;
        }
        if out.ready() == Some(self.inst) && !self.any_ready {
            self.any_ready = true;
            let sig = self.signed(ctx);
            for (to, from) in std::mem::take(&mut self.held) {
                let msg = ProbMsg::Ready {
                    inst: self.inst,
                    payload: self.message.clone(),
                    sig,
                };
                let _ = ctx.send_delayed(to, from, msg, 1);
            }
        }
    }

    fn on_wake(&mut self, ctx: &mut AdvCtx<'_, ProbMsg<P>>, _token: u64) {
        self.round(ctx);
    }
}
