//! The probabilistic broadcast stack.
//!
//! Three layers, each one instance per message:
//!
//! * [`Gossip`]: Erdős-Rényi gossip. A Poisson-sized initial sample, links
//!   reciprocated by subscription, flood-once forwarding.
//! * [`DoubleEcho`]: probabilistic double echo on top of gossip. Echo, ready
//!   and delivery samples are drawn with replacement; processes publish only
//!   to their subscribers and listen only to their samples.
//! * [`ProbBroadcast`]: sequencing. One double-echo instance per index and
//!   per sender, delivered strictly in index order.
//!
//! A duplicated sample member counts once per slot it fills: one Echo from a
//! process drawn twice into the echo sample adds two toward the threshold.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Debug;
use std::hash::Hash;

use at2_core::ProcessId;

use crate::auth::Signature;
use crate::secure::{BcastEvent, Events, SecureBroadcast};
use crate::sim::{Ctx, Message, Protocol, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Instance {
    pub sender: ProcessId,
    pub index: u64,
}

/// What the sender signs. Binding the instance stops cross-instance replay.
pub fn content_statement<P: Hash>(inst: Instance, payload: &P) -> impl Hash + '_ {
    ("pcb", inst, payload)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ProbMsg<P> {
    GossipSubscribe { inst: Instance },
    Gossip { inst: Instance, payload: P, sig: Signature },
    EchoSubscribe { inst: Instance },
    ReadySubscribe { inst: Instance },
    Echo { inst: Instance, payload: P, sig: Signature },
    Ready { inst: Instance, payload: P, sig: Signature },
}

impl<P> ProbMsg<P> {
    pub fn instance(&self) -> Instance {
        match self {
            ProbMsg::GossipSubscribe { inst }
            | ProbMsg::Gossip { inst, .. }
            | ProbMsg::EchoSubscribe { inst }
            | ProbMsg::ReadySubscribe { inst }
            | ProbMsg::Echo { inst, .. }
            | ProbMsg::Ready { inst, .. } => *inst,
        }
    }
}

impl<P: Clone + Debug + Hash> Message for ProbMsg<P> {
    fn kind(&self) -> &'static str {
        match self {
            ProbMsg::GossipSubscribe { .. } => "gossip_subscribe",
            ProbMsg::Gossip { .. } => "gossip",
            ProbMsg::EchoSubscribe { .. } => "echo_subscribe",
            ProbMsg::ReadySubscribe { .. } => "ready_subscribe",
            ProbMsg::Echo { .. } => "echo",
            ProbMsg::Ready { .. } => "ready",
        }
    }
}

/// Sample sizes and thresholds. `g` is the expected gossip sample size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbParams {
    pub g: f64,
    pub e: usize,
    pub e_hat: usize,
    pub r: usize,
    pub r_hat: usize,
    pub d: usize,
    pub d_hat: usize,
}

impl ProbParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let ok = |size: usize, hat: usize| hat >= 1 && hat <= size;
        if !(self.g >= 0.0 && self.g.is_finite()) {
            return Err(SimError::Config(format!("G={} must be a finite non-negative number", self.g)));
        }
        if !ok(self.e, self.e_hat) || !ok(self.r, self.r_hat) || !ok(self.d, self.d_hat) {
            return Err(SimError::Config(format!("thresholds must satisfy 1 <= hat <= size: {self:?}")));
        }
        Ok(())
    }
}

/// One Erdős-Rényi gossip instance.
#[derive(Debug, Clone)]
pub struct Gossip<P> {
    sample: BTreeSet<ProcessId>,
    delivered: Option<(P, Signature)>,
}

impl<P: Clone + Hash> Gossip<P> {
    pub fn init<O>(ctx: &mut Ctx<'_, ProbMsg<P>, O>, inst: Instance, g: f64) -> Self {
        let k = ctx.poisson(g);
        let sample: BTreeSet<ProcessId> = ctx.omega(k).expect("k clamped to n").into_iter().collect();
        for &q in &sample {
            ctx.send(q, ProbMsg::GossipSubscribe { inst });
        }
        Gossip {
            sample,
            delivered: None,
        }
    }

    pub fn sample(&self) -> &BTreeSet<ProcessId> {
        &self.sample
    }

    pub fn delivered(&self) -> Option<&P> {
        self.delivered.as_ref().map(|(p, _)| p)
    }

    fn on_subscribe<O>(&mut self, ctx: &mut Ctx<'_, ProbMsg<P>, O>, inst: Instance, from: ProcessId) {
        if let Some((payload, sig)) = &self.delivered {
            ctx.send(
                from,
                ProbMsg::Gossip {
                    inst,
                    payload: payload.clone(),
                    sig: *sig,
                },
            );
        }
        self.sample.insert(from);
    }

    /// Delivers and forwards on first receipt. Returns whether it delivered.
    fn dispatch<O>(&mut self, ctx: &mut Ctx<'_, ProbMsg<P>, O>, inst: Instance, payload: P, sig: Signature) -> bool {
        if self.delivered.is_some() {
            return false;
        }
        for &q in &self.sample {
            ctx.send(
                q,
                ProbMsg::Gossip {
                    inst,
                    payload: payload.clone(),
                    sig,
                },
            );
        }
        self.delivered = Some((payload, sig));
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReadyVia {
    Echo,
    Feedback,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PcbEvent<P> {
    PbDeliver(P),
    Ready { payload: P, via: ReadyVia },
    Deliver(P),
}

/// One probabilistic double-echo instance.
#[derive(Debug, Clone)]
pub struct DoubleEcho<P> {
    inst: Instance,
    gossip: Gossip<P>,
    echo_sample: Vec<ProcessId>,
    ready_sample: Vec<ProcessId>,
    delivery_sample: Vec<ProcessId>,
    echo_subs: BTreeSet<ProcessId>,
    ready_subs: BTreeSet<ProcessId>,
    echo: Option<(P, Signature)>,
    ready: Option<(P, Signature)>,
    delivered: Option<P>,
    echo_replies: BTreeMap<ProcessId, (P, Signature)>,
    ready_replies: BTreeMap<ProcessId, (P, Signature)>,
    delivery_replies: BTreeMap<ProcessId, (P, Signature)>,
}

fn draw<P, O>(ctx: &mut Ctx<'_, ProbMsg<P>, O>, size: usize) -> Vec<ProcessId> {
    (0..size).map(|_| ctx.omega1()).collect()
}

/// The first payload (in slot order) whose slots reach `threshold`.
fn over_threshold<P: Clone + Eq>(
    sample: &[ProcessId],
    replies: &BTreeMap<ProcessId, (P, Signature)>,
    threshold: usize,
) -> Option<(P, Signature)> {
    let mut counts: Vec<(&(P, Signature), usize)> = Vec::new();
    for slot in sample {
        let Some(reply) = replies.get(slot) else { continue };
        match counts.iter_mut().find(|(r, _)| r.0 == reply.0) {
            Some((_, c)) => *c += 1,
            None => counts.push((reply, 1)),
        }
    }
    counts
        .into_iter()
        .find(|(_, c)| *c >= threshold)
        .map(|(r, _)| r.clone())
}

impl<P: Clone + Eq + Hash> DoubleEcho<P> {
    pub fn init<O>(ctx: &mut Ctx<'_, ProbMsg<P>, O>, inst: Instance, params: &ProbParams) -> Self {
        let gossip = Gossip::init(ctx, inst, params.g);
        let echo_sample = draw(ctx, params.e);
        let ready_sample = draw(ctx, params.r);
        let delivery_sample = draw(ctx, params.d);
        let echo_to: BTreeSet<ProcessId> = echo_sample.iter().copied().collect();
        for q in echo_to {
            ctx.send(q, ProbMsg::EchoSubscribe { inst });
        }
        let ready_to: BTreeSet<ProcessId> = ready_sample.iter().chain(&delivery_sample).copied().collect();
        for q in ready_to {
            ctx.send(q, ProbMsg::ReadySubscribe { inst });
        }
        DoubleEcho {
            inst,
            gossip,
            echo_sample,
            ready_sample,
            delivery_sample,
            echo_subs: BTreeSet::new(),
            ready_subs: BTreeSet::new(),
            echo: None,
            ready: None,
            delivered: None,
            echo_replies: BTreeMap::new(),
            ready_replies: BTreeMap::new(),
            delivery_replies: BTreeMap::new(),
        }
    }

    pub fn gossip(&self) -> &Gossip<P> {
        &self.gossip
    }

    pub fn echo_sample(&self) -> &[ProcessId] {
        &self.echo_sample
    }

    pub fn ready_sample(&self) -> &[ProcessId] {
        &self.ready_sample
    }

    pub fn delivery_sample(&self) -> &[ProcessId] {
        &self.delivery_sample
    }

    pub fn echoed(&self) -> Option<&P> {
        self.echo.as_ref().map(|e| &e.0)
    }

    pub fn ready(&self) -> Option<&P> {
        self.ready.as_ref().map(|e| &e.0)
    }

    pub fn delivered(&self) -> Option<&P> {
        self.delivered.as_ref()
    }

    /// Sender side: sign and hand the message to gossip.
    pub fn broadcast<O>(&mut self, ctx: &mut Ctx<'_, ProbMsg<P>, O>, payload: P) -> Vec<PcbEvent<P>> {
        let sig = ctx.sign(&content_statement(self.inst, &payload));
        let mut events = Vec::new();
        if self.gossip.dispatch(ctx, self.inst, payload.clone(), sig) {
            self.on_pb_deliver(ctx, payload, sig, &mut events);
        }
        events
    }

    fn on_pb_deliver<O>(&mut self, ctx: &mut Ctx<'_, ProbMsg<P>, O>, payload: P, sig: Signature, events: &mut Vec<PcbEvent<P>>) {
        events.push(PcbEvent::PbDeliver(payload.clone()));
        for &q in &self.echo_subs {
            ctx.send(
                q,
                ProbMsg::Echo {
                    inst: self.inst,
                    payload: payload.clone(),
                    sig,
                },
            );
        }
        self.echo = Some((payload, sig));
    }

    fn become_ready<O>(&mut self, ctx: &mut Ctx<'_, ProbMsg<P>, O>, (payload, sig): (P, Signature), via: ReadyVia, events: &mut Vec<PcbEvent<P>>) {
        for &q in &self.ready_subs {
            ctx.send(
                q,
                ProbMsg::Ready {
                    inst: self.inst,
                    payload: payload.clone(),
                    sig,
                },
            );
        }
        events.push(PcbEvent::Ready {
            payload: payload.clone(),
            via,
        });
        self.ready = Some((payload, sig));
    }

    /// Re-evaluates the three threshold guards.
    fn check_thresholds<O>(&mut self, ctx: &mut Ctx<'_, ProbMsg<P>, O>, params: &ProbParams, events: &mut Vec<PcbEvent<P>>) {
        if self.ready.is_none() {
            if let Some(r) = over_threshold(&self.echo_sample, &self.echo_replies, params.e_hat) {
                self.become_ready(ctx, r, ReadyVia::Echo, events);
            }
        }
        if self.ready.is_none() {
            if let Some(r) = over_threshold(&self.ready_sample, &self.ready_replies, params.r_hat) {
                self.become_ready(ctx, r, ReadyVia::Feedback, events);
            }
        }
        if self.delivered.is_none() {
            if let Some((payload, _)) = over_threshold(&self.delivery_sample, &self.delivery_replies, params.d_hat) {
                self.delivered = Some(payload.clone());
                events.push(PcbEvent::Deliver(payload));
            }
        }
    }

    pub fn on_message<O>(&mut self, ctx: &mut Ctx<'_, ProbMsg<P>, O>, params: &ProbParams, from: ProcessId, msg: ProbMsg<P>) -> Vec<PcbEvent<P>> {
        let inst = self.inst;
        let sender = inst.sender;
        let mut events = Vec::new();
        match msg {
            ProbMsg::GossipSubscribe { .. } => self.gossip.on_subscribe(ctx, inst, from),
            ProbMsg::Gossip { payload, sig, .. } => {
                if ctx.verify(sender, &content_statement(inst, &payload), &sig)
                    && self.gossip.dispatch(ctx, inst, payload.clone(), sig)
                {
                    self.on_pb_deliver(ctx, payload, sig, &mut events);
                }
            }
            ProbMsg::EchoSubscribe { .. } => {
                if let Some((payload, sig)) = &self.echo {
                    ctx.send(
                        from,
                        ProbMsg::Echo {
                            inst,
                            payload: payload.clone(),
                            sig: *sig,
                        },
                    );
                }
                self.echo_subs.insert(from);
            }
            ProbMsg::ReadySubscribe { .. } => {
                if let Some((payload, sig)) = &self.ready {
                    ctx.send(
                        from,
                        ProbMsg::Ready {
                            inst,
                            payload: payload.clone(),
                            sig: *sig,
                        },
                    );
                }
                self.ready_subs.insert(from);
            }
            ProbMsg::Echo { payload, sig, .. } => {
                if self.echo_sample.contains(&from)
                    && !self.echo_replies.contains_key(&from)
                    && ctx.verify(sender, &content_statement(inst, &payload), &sig)
                {
                    self.echo_replies.insert(from, (payload, sig));
                    self.check_thresholds(ctx, params, &mut events);
                }
            }
            ProbMsg::Ready { payload, sig, .. } => {
                if ctx.verify(sender, &content_statement(inst, &payload), &sig) {
                    let mut changed = false;
                    if self.ready_sample.contains(&from) && !self.ready_replies.contains_key(&from) {
                        self.ready_replies.insert(from, (payload.clone(), sig));
                        changed = true;
                    }
                    if self.delivery_sample.contains(&from) && !self.delivery_replies.contains_key(&from) {
                        self.delivery_replies.insert(from, (payload, sig));
                        changed = true;
                    }
                    if changed {
                        self.check_thresholds(ctx, params, &mut events);
                    }
                }
            }
        }
        events
    }
}

/// Per-sender sequencing state.
#[derive(Debug, Clone)]
pub struct Sequencer<P> {
    sender: ProcessId,
    next: u64,
    expected: u64,
    messages: BTreeMap<u64, P>,
    instances: BTreeMap<u64, DoubleEcho<P>>,
    delivered: Vec<P>,
}

impl<P> Sequencer<P> {
    pub fn instance(&self, index: u64) -> Option<&DoubleEcho<P>> {
        self.instances.get(&index)
    }

    pub fn delivered(&self) -> &[P] {
        &self.delivered
    }

    pub fn next(&self) -> u64 {
        self.next
    }

    pub fn expected(&self) -> u64 {
        self.expected
    }
}

/// Observations the sequenced layer reports besides deliveries.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ProbNote<P> {
    PbDeliver { inst: Instance },
    Ready { inst: Instance, payload: P, via: ReadyVia },
    PcbDeliver { inst: Instance, payload: P },
}

/// Sequenced probabilistic double echo for a fixed set of senders.
#[derive(Debug, Clone)]
pub struct ProbBroadcast<P> {
    params: ProbParams,
    senders: Vec<ProcessId>,
    seqs: BTreeMap<ProcessId, Sequencer<P>>,
    /// Messages for instances this process has not initialized yet.
    pending: BTreeMap<Instance, Vec<(ProcessId, ProbMsg<P>)>>,
}

impl<P: Clone + Debug + Hash + Eq> ProbBroadcast<P> {
    /// `senders` lists whose broadcasts this process follows.
    pub fn new(params: ProbParams, senders: Vec<ProcessId>) -> Self {
        ProbBroadcast {
            params,
            senders,
            seqs: BTreeMap::new(),
            pending: BTreeMap::new(),
        }
    }

    pub fn params(&self) -> &ProbParams {
        &self.params
    }

    pub fn sequencer(&self, sender: ProcessId) -> Option<&Sequencer<P>> {
        self.seqs.get(&sender)
    }

    pub fn delivered_from(&self, sender: ProcessId) -> &[P] {
        self.seqs.get(&sender).map_or(&[], |s| s.delivered.as_slice())
    }

    /// Initializes instance `seq.next` and replays anything buffered for it.
    fn open_instance<O>(&mut self, ctx: &mut Ctx<'_, ProbMsg<P>, O>, sender: ProcessId, out: &mut Events<Self>) {
        let index = self.seqs[&sender].next;
        let inst = Instance { sender, index };
        let de = DoubleEcho::init(ctx, inst, &self.params);
        self.seqs.get_mut(&sender).unwrap().instances.insert(index, de);
        for (from, msg) in self.pending.remove(&inst).unwrap_or_default() {
            self.handle(ctx, inst, from, msg, out);
        }
    }

    fn expand<O>(&mut self, ctx: &mut Ctx<'_, ProbMsg<P>, O>, sender: ProcessId, out: &mut Events<Self>) {
        self.seqs.get_mut(&sender).unwrap().next += 1;
        self.open_instance(ctx, sender, out);
    }

    fn handle<O>(&mut self, ctx: &mut Ctx<'_, ProbMsg<P>, O>, inst: Instance, from: ProcessId, msg: ProbMsg<P>, out: &mut Events<Self>) {
        let params = self.params;
        let seq = self.seqs.get_mut(&inst.sender).unwrap();
        let events = seq.instances.get_mut(&inst.index).unwrap().on_message(ctx, &params, from, msg);
        self.absorb(ctx, inst, events, out);
    }

    fn absorb<O>(&mut self, ctx: &mut Ctx<'_, ProbMsg<P>, O>, inst: Instance, events: Vec<PcbEvent<P>>, out: &mut Events<Self>) {
        let mut progressed = false;
        for e in events {
            match e {
                PcbEvent::PbDeliver(_) => out.push(BcastEvent::Note(ProbNote::PbDeliver { inst })),
                PcbEvent::Ready { payload, via } => out.push(BcastEvent::Note(ProbNote::Ready { inst, payload, via })),
                PcbEvent::Deliver(payload) => {
                    out.push(BcastEvent::Note(ProbNote::PcbDeliver {
                        inst,
                        payload: payload.clone(),
                    }));
                    let seq = self.seqs.get_mut(&inst.sender).unwrap();
                    seq.messages.insert(inst.index, payload);
                    progressed = true;
                }
            }
        }
        if progressed {
            self.pump(ctx, inst.sender, out);
        }
    }

    /// Delivers buffered messages in index order.
    fn pump<O>(&mut self, ctx: &mut Ctx<'_, ProbMsg<P>, O>, sender: ProcessId, out: &mut Events<Self>) {
        loop {
            let seq = self.seqs.get_mut(&sender).unwrap();
            let Some(payload) = seq.messages.get(&seq.expected).cloned() else {
                return;
            };
            seq.expected += 1;
            seq.delivered.push(payload.clone());
            out.push(BcastEvent::Deliver {
                source: sender,
                seq: seq.expected,
                payload,
            });
            if ctx.me() != sender {
                self.expand(ctx, sender, out);
            }
        }
    }
}

impl<P: Clone + Debug + Hash + Eq> SecureBroadcast for ProbBroadcast<P> {
    type Msg = ProbMsg<P>;
    type Payload = P;
    type Note = ProbNote<P>;

    fn init<O>(&mut self, ctx: &mut Ctx<'_, ProbMsg<P>, O>) -> Events<Self> {
        let mut out = Vec::new();
        for sender in self.senders.clone() {
            self.seqs.insert(
                sender,
                Sequencer {
                    sender,
                    next: 0,
                    expected: 0,
                    messages: BTreeMap::new(),
                    instances: BTreeMap::new(),
                    delivered: Vec::new(),
                },
            );
            self.open_instance(ctx, sender, &mut out);
        }
        out
    }

    fn broadcast<O>(&mut self, ctx: &mut Ctx<'_, ProbMsg<P>, O>, payload: P) -> Events<Self> {
        let me = ctx.me();
        let mut out = Vec::new();
        let Some(seq) = self.seqs.get_mut(&me) else {
            return out;
        };
        let index = seq.next;
        let events = seq.instances.get_mut(&index).unwrap().broadcast(ctx, payload);
        self.expand(ctx, me, &mut out);
        self.absorb(ctx, Instance { sender: me, index }, events, &mut out);
        out
    }

    fn on_message<O>(&mut self, ctx: &mut Ctx<'_, ProbMsg<P>, O>, from: ProcessId, msg: ProbMsg<P>) -> Events<Self> {
        let inst = msg.instance();
        let mut out = Vec::new();
        let Some(seq) = self.seqs.get(&inst.sender) else {
            return out;
        };
        debug_assert_eq!(seq.sender, inst.sender);
        if seq.instances.contains_key(&inst.index) {
            self.handle(ctx, inst, from, msg, &mut out);
        } else if inst.index > seq.next {
            self.pending.entry(inst).or_default().push((from, msg));
        }
        out
    }
}

/// A single gossip instance run on its own, with sender `sender`.
#[derive(Debug, Clone)]
pub struct GossipNode<P> {
    inst: Instance,
    g: f64,
    state: Option<Gossip<P>>,
}

impl<P> GossipNode<P> {
    pub fn new(sender: ProcessId, g: f64) -> Self {
        GossipNode {
            inst: Instance { sender, index: 0 },
            g,
            state: None,
        }
    }

    pub fn gossip(&self) -> Option<&Gossip<P>> {
        self.state.as_ref()
    }
}

impl<P: Clone + Debug + Hash> Protocol for GossipNode<P> {
    type Msg = ProbMsg<P>;
    type Input = P;
    type Output = P;

    fn init(&mut self, ctx: &mut Ctx<'_, ProbMsg<P>, P>) {
        self.state = Some(Gossip::init(ctx, self.inst, self.g));
    }

    fn on_message(&mut self, ctx: &mut Ctx<'_, ProbMsg<P>, P>, from: ProcessId, msg: ProbMsg<P>) {
        let inst = self.inst;
        let state = self.state.as_mut().expect("initialized");
        match msg {
            ProbMsg::GossipSubscribe { inst: i } if i == inst => state.on_subscribe(ctx, inst, from),
            ProbMsg::Gossip { inst: i, payload, sig } if i == inst => {
                if ctx.verify(inst.sender, &content_statement(inst, &payload), &sig)
                    && state.dispatch(ctx, inst, payload.clone(), sig)
                {
                    ctx.emit(payload);
                }
            }
            _ => {}
        }
    }

    fn on_input(&mut self, ctx: &mut Ctx<'_, ProbMsg<P>, P>, payload: P) {
        if ctx.me() != self.inst.sender {
            return;
        }
        let sig = ctx.sign(&content_statement(self.inst, &payload));
        let state = self.state.as_mut().expect("initialized");
        if state.dispatch(ctx, self.inst, payload.clone(), sig) {
            ctx.emit(payload);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicated_slots_count_with_multiplicity() {
        let keys = crate::auth::Keyring::new(0, 3);
        let sig = keys.sign(ProcessId(0), &1u8);
        let sample = [ProcessId(1), ProcessId(1), ProcessId(2)];
        let mut replies = BTreeMap::new();
        replies.insert(ProcessId(1), ("m", sig));
        assert_eq!(over_threshold(&sample, &replies, 2).map(|r| r.0), Some("m"));
        assert_eq!(over_threshold(&sample, &replies, 3), None);
        replies.insert(ProcessId(2), ("x", sig));
        assert_eq!(over_threshold(&sample, &replies, 3), None);
    }

    #[test]
    fn params_validation() {
        let p = ProbParams {
            g: 4.0,
            e: 3,
            e_hat: 2,
            r: 3,
            r_hat: 2,
            d: 3,
            d_hat: 2,
        };
        assert!(p.validate().is_ok());
        assert!(ProbParams { e_hat: 4, ..p }.validate().is_err());
        assert!(ProbParams { d_hat: 0, ..p }.validate().is_err());
    }
}
