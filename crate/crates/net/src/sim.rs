//! Deterministic discrete-event simulation of an asynchronous network with
//! authenticated links, adversarial delays and Byzantine processes.
//!
//! Correct processes run a [`Protocol`]. Byzantine processes run no protocol
//! code: messages addressed to them are handed to a single [`Adversary`],
//! which may answer with arbitrary messages signed as any Byzantine id.
//! The adversary also picks the delay of every message, but it only ever
//! sees a [`LinkView`], which hides payloads of correct-to-correct traffic.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Debug;
use std::hash::Hash;

use at2_core::ProcessId;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::auth::{digest_of, Keyring, ShaSink, Signature};

/// Delays above this are treated as "never", which the model forbids.
pub const DELAY_CAP: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("sample of {requested} distinct processes requested from {n}")]
    SampleTooLarge { requested: usize, n: usize },
    #[error("adversary chose delay {0}, which is not in [1, {DELAY_CAP}]")]
    InvalidDelay(u64),
    #[error("adversary tried to act as correct process {0}")]
    Forgery(ProcessId),
    #[error("unknown process {0}")]
    UnknownProcess(ProcessId),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Wire messages name their kind for trace records.
pub trait Message: Clone + Debug + Hash {
    fn kind(&self) -> &'static str;
}

pub trait Protocol {
    type Msg: Message;
    type Input;
    type Output: Clone + Debug + Hash;

    fn init(&mut self, ctx: &mut Ctx<'_, Self::Msg, Self::Output>);
    fn on_message(&mut self, ctx: &mut Ctx<'_, Self::Msg, Self::Output>, from: ProcessId, msg: Self::Msg);
    fn on_input(&mut self, ctx: &mut Ctx<'_, Self::Msg, Self::Output>, input: Self::Input);
}

/// Everything a correct process may do from inside a handler.
pub struct Ctx<'a, M, O> {
    me: ProcessId,
    n: usize,
    now: u64,
    rng: &'a mut ChaCha8Rng,
    keys: &'a Keyring,
    outbox: &'a mut Vec<(ProcessId, M)>,
    outputs: &'a mut Vec<O>,
}

impl<M, O> Ctx<'_, M, O> {
    pub fn me(&self) -> ProcessId {
        self.me
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn send(&mut self, to: ProcessId, msg: M) {
        self.outbox.push((to, msg));
    }

    /// Sends to every process, including this one.
    pub fn send_all(&mut self, msg: M)
    where
        M: Clone,
    {
        for q in 0..self.n {
            self.outbox.push((ProcessId(q as u32), msg.clone()));
        }
    }

    pub fn emit(&mut self, out: O) {
        self.outputs.push(out);
    }

    /// The sampling oracle: `k` distinct processes, uniformly at random.
    pub fn omega(&mut self, k: usize) -> Result<Vec<ProcessId>, SimError> {
        if k > self.n {
            return Err(SimError::SampleTooLarge {
                requested: k,
                n: self.n,
            });
        }
        Ok(index::sample(self.rng, self.n, k)
            .into_iter()
            .map(|i| ProcessId(i as u32))
            .collect())
    }

    /// One uniformly random process. Repeated calls sample with replacement.
    pub fn omega1(&mut self) -> ProcessId {
        ProcessId(self.rng.random_range(0..self.n) as u32)
    }

    /// A Poisson draw with the given mean, clamped to `[0, n]`.
    pub fn poisson(&mut self, mean: f64) -> usize {
        if mean <= 0.0 {
            return 0;
        }
        let x: f64 = Poisson::new(mean).expect("positive mean").sample(self.rng);
        (x as usize).min(self.n)
    }

    pub fn sign<T: Hash + ?Sized>(&self, value: &T) -> Signature {
        self.keys.sign(self.me, value)
    }

    pub fn verify<T: Hash + ?Sized>(&self, signer: ProcessId, value: &T, sig: &Signature) -> bool {
        self.keys.verify(signer, value, sig)
    }
}

/// What the adversary is shown about a message in flight.
///
/// Traffic to or from a Byzantine process is shown in full. For traffic
/// between two correct processes only the time and size are shown, plus the
/// endpoints if the run enables `expose_endpoints`.
pub struct LinkView<'a, M> {
    now: u64,
    size: usize,
    endpoints: Option<(ProcessId, ProcessId)>,
    payload: Option<&'a M>,
}

impl<'a, M> LinkView<'a, M> {
    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn endpoints(&self) -> Option<(ProcessId, ProcessId)> {
        self.endpoints
    }

    pub fn payload(&self) -> Option<&'a M> {
        self.payload
    }
}

struct AdvSend<M> {
    from: ProcessId,
    to: ProcessId,
    msg: M,
    delay: Option<u64>,
}

/// What the adversary may do from inside one of its hooks.
pub struct AdvCtx<'a, M> {
    now: u64,
    n: usize,
    byzantine: &'a BTreeSet<ProcessId>,
    keys: &'a Keyring,
    rng: &'a mut ChaCha8Rng,
    sends: &'a mut Vec<AdvSend<M>>,
    wakes: &'a mut Vec<(u64, u64)>,
}

impl<M> AdvCtx<'_, M> {
    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn byzantine(&self) -> &BTreeSet<ProcessId> {
        self.byzantine
    }

    pub fn correct(&self) -> Vec<ProcessId> {
        (0..self.n as u32)
            .map(ProcessId)
            .filter(|p| !self.byzantine.contains(p))
            .collect()
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        self.rng
    }

    fn check(&self, who: ProcessId) -> Result<(), SimError> {
        if self.byzantine.contains(&who) {
            Ok(())
        } else {
            Err(SimError::Forgery(who))
        }
    }

    /// Sends as a Byzantine process; the delay comes from the adversary's
    /// delay policy like any other message.
    pub fn send(&mut self, from: ProcessId, to: ProcessId, msg: M) -> Result<(), SimError> {
        self.check(from)?;
        self.sends.push(AdvSend {
            from,
            to,
            msg,
            delay: None,
        });
        Ok(())
    }

    pub fn send_delayed(&mut self, from: ProcessId, to: ProcessId, msg: M, delay: u64) -> Result<(), SimError> {
        self.check(from)?;
        self.sends.push(AdvSend {
            from,
            to,
            msg,
            delay: Some(delay),
        });
        Ok(())
    }

    pub fn sign<T: Hash + ?Sized>(&self, signer: ProcessId, value: &T) -> Result<Signature, SimError> {
        self.check(signer)?;
        Ok(self.keys.sign(signer, value))
    }

    pub fn verify<T: Hash + ?Sized>(&self, signer: ProcessId, value: &T, sig: &Signature) -> bool {
        self.keys.verify(signer, value, sig)
    }

    /// Asks for `on_wake(token)` after `delay` time units.
    pub fn wake_after(&mut self, delay: u64, token: u64) {
        self.wakes.push((delay.max(1), token));
    }
}

/// The coordinated brain behind all Byzantine processes.
///
/// The default implementation is the crash adversary: Byzantine processes
/// stay silent and delays are uniform in `[1, max_delay]`.
pub trait Adversary<P: Protocol> {
    fn delay(&mut self, link: &LinkView<'_, P::Msg>, rng: &mut ChaCha8Rng, max_delay: u64) -> u64 {
        let _ = link;
        rng.random_range(1..=max_delay)
    }

    fn on_start(&mut self, ctx: &mut AdvCtx<'_, P::Msg>) {
        let _ = ctx;
    }

    /// A message reached Byzantine process `to`.
    fn on_message(&mut self, ctx: &mut AdvCtx<'_, P::Msg>, to: ProcessId, from: ProcessId, msg: P::Msg) {
        let _ = (ctx, to, from, msg);
    }

    /// A correct process produced an output. Only adversaries that are
    /// granted the matching observation power should look at these.
    fn on_output(&mut self, ctx: &mut AdvCtx<'_, P::Msg>, who: ProcessId, out: &P::Output) {
        let _ = (ctx, who, out);
    }

    fn on_wake(&mut self, ctx: &mut AdvCtx<'_, P::Msg>, token: u64) {
        let _ = (ctx, token);
    }
}

/// Byzantine processes that never send anything.
#[derive(Debug, Clone, Copy, Default)]
pub struct Crash;

impl<P: Protocol> Adversary<P> for Crash {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimConfig {
    pub n: usize,
    pub byzantine: BTreeSet<ProcessId>,
    pub seed: u64,
    pub max_delay: u64,
    /// Deliver messages on each ordered pair in send order.
    pub fifo: bool,
    /// Show the endpoints of correct-to-correct messages to the delay policy.
    pub expose_endpoints: bool,
    pub max_events: u64,
    pub max_time: u64,
    /// Keep a `time,from,to,kind,detail` line per delivered message.
    pub record: bool,
}

impl SimConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        SimConfig {
            n,
            byzantine: BTreeSet::new(),
            seed,
            max_delay: 10,
            fifo: false,
            expose_endpoints: false,
            max_events: 50_000_000,
            max_time: u64::MAX,
            record: false,
        }
    }

    pub fn with_byzantine<I: IntoIterator<Item = ProcessId>>(mut self, ids: I) -> Self {
        self.byzantine = ids.into_iter().collect();
        self
    }

    pub fn is_correct(&self, p: ProcessId) -> bool {
        p.index() < self.n && !self.byzantine.contains(&p)
    }

    pub fn correct(&self) -> impl Iterator<Item = ProcessId> + '_ {
        (0..self.n as u32).map(ProcessId).filter(|p| !self.byzantine.contains(p))
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n == 0 {
            return Err(SimError::Config("n must be positive".into()));
        }
        if let Some(p) = self.byzantine.iter().find(|p| p.index() >= self.n) {
            return Err(SimError::UnknownProcess(*p));
        }
        if self.byzantine.len() >= self.n {
            return Err(SimError::Config("at least one process must be correct".into()));
        }
        if self.max_delay == 0 || self.max_delay > DELAY_CAP {
            return Err(SimError::Config(format!("max_delay {} out of range", self.max_delay)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Quiescent,
    TimeLimit,
    EventLimit,
}

pub struct SimTrace<P: Protocol> {
    pub outputs: Vec<(u64, ProcessId, P::Output)>,
    /// Final state of each correct process; `None` for Byzantine ids.
    pub nodes: Vec<Option<P>>,
    pub hash: [u8; 32],
    pub stop: StopReason,
    pub events: u64,
    pub messages: u64,
    pub end_time: u64,
    pub records: Vec<String>,
}

impl<P: Protocol> SimTrace<P> {
    pub fn hash_hex(&self) -> String {
        hex::encode(self.hash)
    }

    pub fn node(&self, p: ProcessId) -> Option<&P> {
        self.nodes.get(p.index()).and_then(Option::as_ref)
    }

    pub fn correct_nodes(&self) -> impl Iterator<Item = (ProcessId, &P)> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.as_ref().map(|n| (ProcessId(i as u32), n)))
    }

    pub fn outputs_of(&self, p: ProcessId) -> impl Iterator<Item = &P::Output> {
        self.outputs.iter().filter(move |(_, q, _)| *q == p).map(|(_, _, o)| o)
    }
}

enum Event<M, I> {
    Deliver { from: ProcessId, to: ProcessId, msg: M },
    Input { to: ProcessId, input: I },
    Wake { token: u64 },
}

fn derive_rng(seed: u64, label: &[u8], index: u64) -> ChaCha8Rng {
    let mut sha = Sha256::new();
    sha.update(label);
    sha.update(seed.to_le_bytes());
    sha.update(index.to_le_bytes());
    ChaCha8Rng::from_seed(sha.finalize().into())
}

pub struct Simulation<P: Protocol, A> {
    cfg: SimConfig,
    nodes: Vec<Option<P>>,
    rngs: Vec<ChaCha8Rng>,
    keys: Keyring,
    adversary: A,
    adv_rng: ChaCha8Rng,
    delay_rng: ChaCha8Rng,
    queue: BTreeMap<(u64, u64), Event<P::Msg, P::Input>>,
    next_seq: u64,
    now: u64,
    fifo_tail: BTreeMap<(ProcessId, ProcessId), u64>,
    trace: ShaSink,
    outputs: Vec<(u64, ProcessId, P::Output)>,
    records: Vec<String>,
    events: u64,
    messages: u64,
}

impl<P: Protocol, A: Adversary<P>> Simulation<P, A> {
    /// Builds one protocol instance per correct process.
    pub fn new<F>(cfg: SimConfig, mut factory: F, adversary: A) -> Result<Self, SimError>
    where
        F: FnMut(ProcessId) -> P,
    {
        cfg.validate()?;
        let nodes = (0..cfg.n as u32)
            .map(ProcessId)
            .map(|p| (!cfg.byzantine.contains(&p)).then(|| factory(p)))
            .collect();
        let rngs = (0..cfg.n as u64).map(|i| derive_rng(cfg.seed, b"proc", i)).collect();
        Ok(Simulation {
            keys: Keyring::new(cfg.seed, cfg.n),
            adv_rng: derive_rng(cfg.seed, b"adversary", 0),
            delay_rng: derive_rng(cfg.seed, b"delay", 0),
            cfg,
            nodes,
            rngs,
            adversary,
            queue: BTreeMap::new(),
            next_seq: 0,
            now: 0,
            fifo_tail: BTreeMap::new(),
            trace: ShaSink::new(),
            outputs: Vec::new(),
            records: Vec::new(),
            events: 0,
            messages: 0,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// Hands `input` to process `to` at time `at`. Inputs to Byzantine
    /// processes are dropped.
    pub fn schedule_input(&mut self, at: u64, to: ProcessId, input: P::Input) -> Result<(), SimError> {
        if to.index() >= self.cfg.n {
            return Err(SimError::UnknownProcess(to));
        }
        self.push(at, Event::Input { to, input });
        Ok(())
    }

    fn push(&mut self, at: u64, ev: Event<P::Msg, P::Input>) {
        self.queue.insert((at, self.next_seq), ev);
        self.next_seq += 1;
    }

    fn enqueue_message(&mut self, from: ProcessId, to: ProcessId, msg: P::Msg, forced: Option<u64>) -> Result<(), SimError> {
        if to.index() >= self.cfg.n {
            return Err(SimError::UnknownProcess(to));
        }
        let delay = match forced {
            Some(d) => d,
            None => {
                let visible = self.cfg.byzantine.contains(&from) || self.cfg.byzantine.contains(&to);
                let view = LinkView {
                    now: self.now,
                    size: digest_of(&msg).1,
                    endpoints: (visible || self.cfg.expose_endpoints).then_some((from, to)),
                    payload: visible.then_some(&msg),
                };
                self.adversary.delay(&view, &mut self.delay_rng, self.cfg.max_delay)
            }
        };
        if delay == 0 || delay > DELAY_CAP {
            return Err(SimError::InvalidDelay(delay));
        }
        let mut at = self.now.saturating_add(delay);
        if self.cfg.fifo {
            let tail = self.fifo_tail.entry((from, to)).or_insert(0);
            at = at.max(*tail);
            *tail = at;
        }
        self.messages += 1;
        self.push(at, Event::Deliver { from, to, msg });
        Ok(())
    }

    fn run_correct<F>(&mut self, p: ProcessId, f: F) -> Result<(), SimError>
    where
        F: FnOnce(&mut P, &mut Ctx<'_, P::Msg, P::Output>),
    {
        let mut outbox = Vec::new();
        let mut outputs = Vec::new();
        {
            let node = self.nodes[p.index()].as_mut().expect("correct process");
            let mut ctx = Ctx {
                me: p,
                n: self.cfg.n,
                now: self.now,
                rng: &mut self.rngs[p.index()],
                keys: &self.keys,
                outbox: &mut outbox,
                outputs: &mut outputs,
            };
            f(node, &mut ctx);
        }
        for (to, msg) in outbox {
            self.enqueue_message(p, to, msg, None)?;
        }
        for out in outputs {
            (b"out", p, &out).hash(&mut self.trace);
            self.outputs.push((self.now, p, out.clone()));
            self.run_adversary(|a, ctx| a.on_output(ctx, p, &out))?;
        }
        Ok(())
    }

    fn run_adversary<F>(&mut self, f: F) -> Result<(), SimError>
    where
        F: FnOnce(&mut A, &mut AdvCtx<'_, P::Msg>),
    {
        let mut sends = Vec::new();
        let mut wakes = Vec::new();
        {
            let mut ctx = AdvCtx {
                now: self.now,
                n: self.cfg.n,
                byzantine: &self.cfg.byzantine,
                keys: &self.keys,
                rng: &mut self.adv_rng,
                sends: &mut sends,
                wakes: &mut wakes,
            };
            f(&mut self.adversary, &mut ctx);
        }
        for s in sends {
            self.enqueue_message(s.from, s.to, s.msg, s.delay)?;
        }
        for (delay, token) in wakes {
            self.push(self.now.saturating_add(delay), Event::Wake { token });
        }
        Ok(())
    }

    /// Runs to quiescence (or a configured limit).
    pub fn run(self) -> Result<SimTrace<P>, SimError> {
        self.run_observed(|_, _, _| {})
    }

    /// Like [`run`](Self::run), calling `observe(time, p, state)` after every
    /// handler of a correct process.
    pub fn run_observed<O>(mut self, mut observe: O) -> Result<SimTrace<P>, SimError>
    where
        O: FnMut(u64, ProcessId, &P),
    {
        let correct: Vec<ProcessId> = self.cfg.correct().collect();
        for &p in &correct {
            self.run_correct(p, |node, ctx| node.init(ctx))?;
            observe(self.now, p, self.nodes[p.index()].as_ref().unwrap());
        }
        self.run_adversary(|a, ctx| a.on_start(ctx))?;

        let stop = loop {
            let Some(((at, seq), ev)) = self.queue.pop_first() else {
                break StopReason::Quiescent;
            };
            if at > self.cfg.max_time {
                break StopReason::TimeLimit;
            }
            if self.events >= self.cfg.max_events {
                break StopReason::EventLimit;
            }
            self.now = at;
            self.events += 1;
            (at, seq).hash(&mut self.trace);
            match ev {
                Event::Deliver { from, to, msg } => {
                    (b"msg", from, to, &msg).hash(&mut self.trace);
                    if self.cfg.record {
                        self.records
                            .push(format!("{at},{},{},{},{:?}", from.0, to.0, msg.kind(), msg));
                    }
                    if self.cfg.byzantine.contains(&to) {
                        self.run_adversary(|a, ctx| a.on_message(ctx, to, from, msg))?;
                    } else {
                        self.run_correct(to, |node, ctx| node.on_message(ctx, from, msg))?;
                        observe(at, to, self.nodes[to.index()].as_ref().unwrap());
                    }
                }
                Event::Input { to, input } => {
                    b"input".hash(&mut self.trace);
                    to.hash(&mut self.trace);
                    if !self.cfg.byzantine.contains(&to) {
                        self.run_correct(to, |node, ctx| node.on_input(ctx, input))?;
                        observe(at, to, self.nodes[to.index()].as_ref().unwrap());
                    }
                }
                Event::Wake { token } => {
                    (b"wake", token).hash(&mut self.trace);
                    self.run_adversary(|a, ctx| a.on_wake(ctx, token))?;
                }
            }
        };

        Ok(SimTrace {
            outputs: self.outputs,
            nodes: self.nodes,
            hash: self.trace.digest(),
            stop,
            events: self.events,
            messages: self.messages,
            end_time: self.now,
            records: self.records,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Clone, Debug, Hash, PartialEq)]
    struct Ping(u32);

    impl Message for Ping {
        fn kind(&self) -> &'static str {
            "ping"
        }
    }

    struct Echo {
        got: Vec<(ProcessId, u32)>,
    }

    impl Protocol for Echo {
        type Msg = Ping;
        type Input = (ProcessId, u32);
        type Output = u32;

        fn init(&mut self, _: &mut Ctx<'_, Ping, u32>) {}

        fn on_message(&mut self, ctx: &mut Ctx<'_, Ping, u32>, from: ProcessId, msg: Ping) {
            self.got.push((from, msg.0));
            ctx.emit(msg.0);
        }

        fn on_input(&mut self, ctx: &mut Ctx<'_, Ping, u32>, (to, v): (ProcessId, u32)) {
            ctx.send(to, Ping(v));
        }
    }

    fn echo() -> Echo {
        Echo { got: Vec::new() }
    }

    #[test]
    fn one_send_is_delivered_once() {
        let mut sim = Simulation::new(SimConfig::new(2, 3), |_| echo(), Crash).unwrap();
        sim.schedule_input(0, ProcessId(0), (ProcessId(1), 42)).unwrap();
        let t = sim.run().unwrap();
        assert_eq!(t.stop, StopReason::Quiescent);
        assert_eq!(t.node(ProcessId(1)).unwrap().got, vec![(ProcessId(0), 42)]);
        assert!(t.node(ProcessId(0)).unwrap().got.is_empty());
        assert_eq!(t.messages, 1);
    }

    #[test]
    fn fifo_preserves_send_order_per_pair() {
        let mut cfg = SimConfig::new(2, 11);
        cfg.fifo = true;
        cfg.max_delay = 50;
        let mut sim = Simulation::new(cfg, |_| echo(), Crash).unwrap();
        for v in 0..30 {
            sim.schedule_input(0, ProcessId(0), (ProcessId(1), v)).unwrap();
        }
        let t = sim.run().unwrap();
        let got: Vec<u32> = t.node(ProcessId(1)).unwrap().got.iter().map(|g| g.1).collect();
        assert_eq!(got, (0..30).collect::<Vec<_>>());
    }

    struct Stall;

    impl Adversary<Echo> for Stall {
        fn delay(&mut self, _: &LinkView<'_, Ping>, _: &mut ChaCha8Rng, _: u64) -> u64 {
            u64::MAX
        }
    }

    #[test]
    fn infinite_delay_is_rejected() {
        let mut sim = Simulation::new(SimConfig::new(2, 1), |_| echo(), Stall).unwrap();
        sim.schedule_input(0, ProcessId(0), (ProcessId(1), 1)).unwrap();
        assert_eq!(sim.run().err(), Some(SimError::InvalidDelay(u64::MAX)));
    }

    #[test]
    fn omega_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let keys = Keyring::new(0, 5);
        let (mut outbox, mut outputs) = (Vec::<(ProcessId, Ping)>::new(), Vec::<u32>::new());
        let mut ctx = Ctx {
            me: ProcessId(0),
            n: 5,
            now: 0,
            rng: &mut rng,
            keys: &keys,
            outbox: &mut outbox,
            outputs: &mut outputs,
        };
        assert!(ctx.omega(0).unwrap().is_empty());
        let mut all = ctx.omega(5).unwrap();
        all.sort();
        assert_eq!(all, (0..5).map(ProcessId).collect::<Vec<_>>());
        assert!(ctx.omega(6).is_err());
        assert!(ctx.poisson(1000.0) <= 5);
        assert_eq!(ctx.poisson(0.0), 0);
    }
}
