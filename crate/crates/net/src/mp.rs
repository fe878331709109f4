//! The consensusless transfer engine, generic over the secure broadcast
//! layer underneath it.
//!
//! Process `p` owns account `AccountId(p)`. A transfer checks the local
//! balance, broadcasts the transfer together with the incoming transfers it
//! depends on, and completes once the process delivers and validates its own
//! message. Deliveries from other processes queue in `to_validate` until they
//! pass the validity check, which is re-run to a fixpoint after every change.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Debug;

use at2_core::{balance, AccountId, Amount, ProcessId, Transfer, TransferMessage};
use thiserror::Error;

use crate::secure::{BcastEvent, SecureBroadcast};
use crate::sim::{Ctx, Protocol};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MpError {
    #[error("process {0} already has a transfer in flight")]
    Busy(ProcessId),
}

pub fn account_of(p: ProcessId) -> AccountId {
    AccountId(p.0)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum At2Input {
    Transfer { dest: AccountId, amount: Amount },
    /// Transfers to issue one after another, each once the previous resolves.
    Script(Vec<(AccountId, Amount)>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum At2Output<N> {
    Applied(Transfer),
    Resolved {
        dest: AccountId,
        amount: Amount,
        success: bool,
    },
    Busy {
        dest: AccountId,
        amount: Amount,
    },
    Note(N),
}

#[derive(Debug, Clone)]
pub struct At2<B> {
    me: ProcessId,
    layer: B,
    initial: BTreeMap<AccountId, Amount>,
    seq: BTreeMap<ProcessId, u64>,
    rec: BTreeMap<ProcessId, u64>,
    hist: BTreeMap<AccountId, BTreeSet<Transfer>>,
    deps: BTreeSet<Transfer>,
    to_validate: BTreeMap<(ProcessId, u64), TransferMessage>,
    pending: Option<Transfer>,
    script: VecDeque<(AccountId, Amount)>,
    invoked: u64,
    resolved: u64,
}

impl<B> At2<B> {
    pub fn new(me: ProcessId, layer: B, initial: BTreeMap<AccountId, Amount>) -> Self {
        At2 {
            me,
            layer,
            initial,
            seq: BTreeMap::new(),
            rec: BTreeMap::new(),
            hist: BTreeMap::new(),
            deps: BTreeSet::new(),
            to_validate: BTreeMap::new(),
            pending: None,
            script: VecDeque::new(),
            invoked: 0,
            resolved: 0,
        }
    }

    pub fn me(&self) -> ProcessId {
        self.me
    }

    pub fn layer(&self) -> &B {
        &self.layer
    }

    pub fn hist(&self) -> &BTreeMap<AccountId, BTreeSet<Transfer>> {
        &self.hist
    }

    pub fn hist_of(&self, a: AccountId) -> impl Iterator<Item = &Transfer> {
        self.hist.get(&a).into_iter().flatten()
    }

    pub fn deps(&self) -> &BTreeSet<Transfer> {
        &self.deps
    }

    pub fn seq_of(&self, q: ProcessId) -> u64 {
        self.seq.get(&q).copied().unwrap_or(0)
    }

    pub fn rec_of(&self, q: ProcessId) -> u64 {
        self.rec.get(&q).copied().unwrap_or(0)
    }

    pub fn to_validate(&self) -> &BTreeMap<(ProcessId, u64), TransferMessage> {
        &self.to_validate
    }

    pub fn initial(&self, a: AccountId) -> Amount {
        self.initial.get(&a).copied().unwrap_or(0)
    }

    pub fn is_busy(&self) -> bool {
        self.pending.is_some()
    }

    /// Operations invoked and operations resolved so far.
    pub fn op_counts(&self) -> (u64, u64) {
        (self.invoked, self.resolved)
    }

    /// True when every invoked or scripted transfer has resolved.
    pub fn is_settled(&self) -> bool {
        self.pending.is_none() && self.script.is_empty() && self.invoked == self.resolved
    }

    /// Balance of `a` over `hist[a] ∪ deps`.
    pub fn read(&self, a: AccountId) -> i128 {
        let union: BTreeSet<&Transfer> = self.hist_of(a).chain(&self.deps).collect();
        balance(a, union, self.initial(a))
    }

    /// Balance of `a` over `hist[a]` alone.
    pub fn hist_balance(&self, a: AccountId) -> i128 {
        balance(a, self.hist_of(a), self.initial(a))
    }

    fn valid(&self, q: ProcessId, msg: &TransferMessage) -> bool {
        let t = &msg.transfer;
        let hq = self.hist.get(&account_of(q));
        account_of(q) == t.source
            && t.seq == self.seq_of(q) + 1
            && balance(t.source, hq.into_iter().flatten(), self.initial(t.source)) >= t.amount as i128
            && msg.deps.iter().all(|d| hq.is_some_and(|h| h.contains(d)))
    }
}

impl<B: SecureBroadcast<Payload = TransferMessage>> At2<B> {
    /// Starts a transfer from this process's account.
    ///
    /// `Ok(Some(false))` means the local balance was too low and nothing was
    /// broadcast; `Ok(None)` means the transfer is in flight.
    pub fn transfer(
        &mut self,
        ctx: &mut Ctx<'_, B::Msg, At2Output<B::Note>>,
        dest: AccountId,
        amount: Amount,
    ) -> Result<Option<bool>, MpError> {
        if self.pending.is_some() {
            return Err(MpError::Busy(self.me));
        }
        self.invoked += 1;
        let me = account_of(self.me);
        if self.read(me) < amount as i128 {
            self.resolved += 1;
            ctx.emit(At2Output::Resolved {
                dest,
                amount,
                success: false,
            });
            return Ok(Some(false));
        }
        let t = Transfer::new(me, dest, amount, self.seq_of(self.me) + 1);
        let msg = TransferMessage::new(t, std::mem::take(&mut self.deps));
        self.pending = Some(t);
        let events = self.layer.broadcast(ctx, msg);
        self.handle(ctx, events);
        Ok(None)
    }

    fn handle(&mut self, ctx: &mut Ctx<'_, B::Msg, At2Output<B::Note>>, events: Vec<BcastEvent<TransferMessage, B::Note>>) {
        let mut delivered = false;
        for e in events {
            match e {
                BcastEvent::Deliver { source, payload, .. } => {
                    let next = self.rec_of(source) + 1;
                    if payload.transfer.seq == next {
                        self.rec.insert(source, next);
                        self.to_validate.insert((source, next), payload);
                        delivered = true;
                    }
                }
                BcastEvent::Note(n) => ctx.emit(At2Output::Note(n)),
            }
        }
        if delivered {
            self.validate(ctx);
        }
    }

    /// Applies valid queued transfers until none is left, in (source, seq)
    /// order.
    fn validate(&mut self, ctx: &mut Ctx<'_, B::Msg, At2Output<B::Note>>) {
        loop {
            let sources: BTreeSet<ProcessId> = self.to_validate.keys().map(|k| k.0).collect();
            let ready = sources.into_iter().find_map(|q| {
                let key = (q, self.seq_of(q) + 1);
                self.to_validate
                    .get(&key)
                    .filter(|m| self.valid(q, m))
                    .map(|_| key)
            });
            let Some(key) = ready else { break };
            let msg = self.to_validate.remove(&key).unwrap();
            let t = msg.transfer;
            self.hist.entry(t.source).or_default().insert(t);
            self.hist.entry(t.dest).or_default().insert(t);
            self.seq.insert(key.0, t.seq);
            ctx.emit(At2Output::Applied(t));
            if t.dest == account_of(self.me) {
                self.deps.insert(t);
            }
            if t.source == account_of(self.me) && self.pending == Some(t) {
                self.pending = None;
                self.resolved += 1;
                ctx.emit(At2Output::Resolved {
                    dest: t.dest,
                    amount: t.amount,
                    success: true,
                });
            }
        }
        self.drain_script(ctx);
    }

    fn drain_script(&mut self, ctx: &mut Ctx<'_, B::Msg, At2Output<B::Note>>) {
        while self.pending.is_none() {
            let Some((dest, amount)) = self.script.pop_front() else { break };
            let _ = self.transfer(ctx, dest, amount);
        }
    }
}

impl<B> Protocol for At2<B>
where
    B: SecureBroadcast<Payload = TransferMessage>,
{
    type Msg = B::Msg;
    type Input = At2Input;
    type Output = At2Output<B::Note>;

    fn init(&mut self, ctx: &mut Ctx<'_, Self::Msg, Self::Output>) {
        let events = self.layer.init(ctx);
        self.handle(ctx, events);
    }

    fn on_message(&mut self, ctx: &mut Ctx<'_, Self::Msg, Self::Output>, from: ProcessId, msg: Self::Msg) {
        let events = self.layer.on_message(ctx, from, msg);
        self.handle(ctx, events);
    }

    fn on_input(&mut self, ctx: &mut Ctx<'_, Self::Msg, Self::Output>, input: At2Input) {
        match input {
            At2Input::Transfer { dest, amount } => {
                if self.transfer(ctx, dest, amount).is_err() {
                    ctx.emit(At2Output::Busy { dest, amount });
                }
            }
            At2Input::Script(list) => {
                self.script.extend(list);
                self.drain_script(ctx);
            }
        }
    }
}

/// Sequence numbers of the applied transfers out of `q`'s account at
/// `node`, ascending.
pub fn outgoing_seqs<B>(node: &At2<B>, q: ProcessId) -> Vec<u64> {
    let a = account_of(q);
    node.hist_of(a).filter(|t| t.source == a).map(|t| t.seq).collect()
}

impl<B> At2<B>
where
    B: Debug,
{
    pub fn debug_summary(&self) -> String {
        format!(
            "p{} seq={:?} rec={:?} to_validate={} pending={:?}",
            self.me.0,
            self.seq,
            self.rec,
            self.to_validate.len(),
            self.pending
        )
    }
}
