//! Signature-based secure broadcast with quorum acknowledgments.
//!
//! The sender floods a signed `Initial`. Every process acknowledges the first
//! payload it sees for a given `(sender, seq)`, but only once it has accepted
//! all lower sequence numbers from that sender, and sends the signed ACK back
//! to the sender alone. With a quorum of ⌊2N/3⌋+1 ACKs the sender floods a
//! `Proof`; any process that verifies a proof relays it once and delivers in
//! sequence order. Two quorums always share a correct process, so two
//! different payloads can never both be proven for the same slot.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Debug;
use std::hash::Hash;

use at2_core::ProcessId;

use crate::auth::{digest_of, Signature};
use crate::secure::{BcastEvent, Events, NoNote, SecureBroadcast};
use crate::sim::{Ctx, Message};

pub fn quorum(n: usize) -> usize {
    2 * n / 3 + 1
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum DetMsg<P> {
    Initial {
        sender: ProcessId,
        seq: u64,
        payload: P,
        sig: Signature,
    },
    Ack {
        sender: ProcessId,
        seq: u64,
        payload: P,
        sig: Signature,
    },
    Proof {
        sender: ProcessId,
        seq: u64,
        payload: P,
        sender_sig: Signature,
        acks: Vec<Signature>,
    },
}

impl<P: Clone + Debug + Hash> Message for DetMsg<P> {
    fn kind(&self) -> &'static str {
        match self {
            DetMsg::Initial { .. } => "initial",
            DetMsg::Ack { .. } => "ack",
            DetMsg::Proof { .. } => "proof",
        }
    }
}

/// The statement a sender signs for its `Initial`.
pub fn initial_statement<P: Hash>(sender: ProcessId, seq: u64, payload: &P) -> impl Hash + '_ {
    ("initial", sender, seq, payload)
}

/// The statement an acknowledging process signs.
pub fn ack_statement<P: Hash>(sender: ProcessId, seq: u64, payload: &P) -> impl Hash + '_ {
    ("ack", sender, seq, payload)
}

#[derive(Debug, Clone)]
struct Outgoing<P> {
    payload: P,
    sig: Signature,
    acks: BTreeMap<ProcessId, Signature>,
    proven: bool,
}

#[derive(Debug, Clone)]
pub struct DetBroadcast<P> {
    n: usize,
    next_seq: u64,
    own: BTreeMap<u64, Outgoing<P>>,
    /// First payload seen per slot, with the sender's signature.
    first_seen: BTreeMap<(ProcessId, u64), (P, Signature)>,
    acked: BTreeSet<(ProcessId, u64)>,
    /// Digests of initials already relayed.
    relayed_initials: BTreeSet<[u8; 32]>,
    proven: BTreeMap<(ProcessId, u64), P>,
    /// Next sequence number to deliver, per source.
    next_delivery: BTreeMap<ProcessId, u64>,
    delivered: BTreeMap<ProcessId, Vec<P>>,
}

impl<P: Clone + Debug + Hash + Eq> DetBroadcast<P> {
    pub fn new(n: usize) -> Self {
        DetBroadcast {
            n,
            next_seq: 1,
            own: BTreeMap::new(),
            first_seen: BTreeMap::new(),
            acked: BTreeSet::new(),
            relayed_initials: BTreeSet::new(),
            proven: BTreeMap::new(),
            next_delivery: BTreeMap::new(),
            delivered: BTreeMap::new(),
        }
    }

    /// Payloads delivered from `source`, in delivery order.
    pub fn delivered_from(&self, source: ProcessId) -> &[P] {
        self.delivered.get(&source).map_or(&[], Vec::as_slice)
    }

    pub fn delivered(&self) -> &BTreeMap<ProcessId, Vec<P>> {
        &self.delivered
    }

    pub fn has_acked(&self, sender: ProcessId, seq: u64) -> bool {
        self.acked.contains(&(sender, seq))
    }

    fn delivered_upto(&self, source: ProcessId) -> u64 {
        self.next_delivery.get(&source).copied().unwrap_or(1) - 1
    }

    fn accepted(&self, source: ProcessId, seq: u64) -> bool {
        seq <= self.delivered_upto(source) || self.acked.contains(&(source, seq))
    }

    fn lower_accepted(&self, source: ProcessId, seq: u64) -> bool {
        (1..seq).all(|s| self.accepted(source, s))
    }

    /// Sends every ACK that has become eligible for `source`.
    fn ack_ready<O>(&mut self, ctx: &mut Ctx<'_, DetMsg<P>, O>, source: ProcessId) {
        loop {
            let next = self
                .first_seen
                .range((source, 1)..=(source, u64::MAX))
                .map(|(&(_, s), _)| s)
                .find(|&s| !self.accepted(source, s) && self.lower_accepted(source, s));
            let Some(seq) = next else { return };
            let (payload, _) = self.first_seen[&(source, seq)].clone();
            let sig = ctx.sign(&ack_statement(source, seq, &payload));
            self.acked.insert((source, seq));
            ctx.send(
                source,
                DetMsg::Ack {
                    sender: source,
                    seq,
                    payload,
                    sig,
                },
            );
        }
    }

    fn try_deliver(&mut self, source: ProcessId, events: &mut Events<Self>) {
        loop {
            let next = self.delivered_upto(source) + 1;
            let Some(payload) = self.proven.remove(&(source, next)) else {
                return;
            };
            self.next_delivery.insert(source, next + 1);
            self.delivered.entry(source).or_default().push(payload.clone());
            events.push(BcastEvent::Deliver {
                source,
                seq: next,
                payload,
            });
        }
    }

    fn valid_proof<O>(
        &self,
        ctx: &Ctx<'_, DetMsg<P>, O>,
        sender: ProcessId,
        seq: u64,
        payload: &P,
        sender_sig: &Signature,
        acks: &[Signature],
    ) -> bool {
        if !ctx.verify(sender, &initial_statement(sender, seq, payload), sender_sig) {
            return false;
        }
        let stmt = ack_statement(sender, seq, payload);
        let mut signers = BTreeSet::new();
        for a in acks {
            if !ctx.verify(a.signer(), &stmt, a) {
                return false;
            }
            signers.insert(a.signer());
        }
        signers.len() >= quorum(self.n)
    }
}

impl<P: Clone + Debug + Hash + Eq> SecureBroadcast for DetBroadcast<P> {
    type Msg = DetMsg<P>;
    type Payload = P;
    type Note = NoNote;

    fn init<O>(&mut self, _: &mut Ctx<'_, DetMsg<P>, O>) -> Events<Self> {
        Vec::new()
    }

    fn broadcast<O>(&mut self, ctx: &mut Ctx<'_, DetMsg<P>, O>, payload: P) -> Events<Self> {
        let seq = self.next_seq;
        self.next_seq += 1;
        let me = ctx.me();
        let sig = ctx.sign(&initial_statement(me, seq, &payload));
        self.own.insert(
            seq,
            Outgoing {
                payload: payload.clone(),
                sig,
                acks: BTreeMap::new(),
                proven: false,
            },
        );
        ctx.send_all(DetMsg::Initial {
            sender: me,
            seq,
            payload,
            sig,
        });
        Vec::new()
    }

    fn on_message<O>(&mut self, ctx: &mut Ctx<'_, DetMsg<P>, O>, from: ProcessId, msg: DetMsg<P>) -> Events<Self> {
        let mut events = Vec::new();
        match msg {
            DetMsg::Initial {
                sender,
                seq,
                payload,
                sig,
            } => {
                if seq == 0 || !ctx.verify(sender, &initial_statement(sender, seq, &payload), &sig) {
                    return events;
                }
                let msg = DetMsg::Initial {
                    sender,
                    seq,
                    payload,
                    sig,
                };
                if self.relayed_initials.insert(digest_of(&msg).0) {
                    for q in 0..self.n as u32 {
                        if ProcessId(q) != from && ProcessId(q) != ctx.me() {
                            ctx.send(ProcessId(q), msg.clone());
                        }
                    }
                }
                let DetMsg::Initial { payload, sig, .. } = msg else { unreachable!() };
                self.first_seen.entry((sender, seq)).or_insert((payload, sig));
                self.ack_ready(ctx, sender);
            }
            DetMsg::Ack {
                sender,
                seq,
                payload,
                sig,
            } => {
                if sender != ctx.me() || !ctx.verify(from, &ack_statement(sender, seq, &payload), &sig) {
                    return events;
                }
                let Some(out) = self.own.get_mut(&seq) else { return events };
                if out.payload != payload || out.proven {
                    return events;
                }
                out.acks.insert(from, sig);
                if out.acks.len() >= quorum(self.n) {
                    out.proven = true;
                    let proof = DetMsg::Proof {
                        sender,
                        seq,
                        payload,
                        sender_sig: out.sig,
                        acks: out.acks.values().copied().collect(),
                    };
                    ctx.send_all(proof);
                }
            }
            DetMsg::Proof {
                sender,
                seq,
                payload,
                sender_sig,
                acks,
            } => {
                if seq == 0
                    || self.accepted_proof(sender, seq)
                    || !self.valid_proof(ctx, sender, seq, &payload, &sender_sig, &acks)
                {
                    return events;
                }
                self.proven.insert((sender, seq), payload.clone());
                let relay = DetMsg::Proof {
                    sender,
                    seq,
                    payload,
                    sender_sig,
                    acks,
                };
                for q in 0..self.n as u32 {
                    if ProcessId(q) != from && ProcessId(q) != ctx.me() {
                        ctx.send(ProcessId(q), relay.clone());
                    }
                }
                self.try_deliver(sender, &mut events);
                // Deliveries count as accepted, which may unlock ACKs.
                self.ack_ready(ctx, sender);
            }
        }
        events
    }
}

impl<P: Clone + Debug + Hash + Eq> DetBroadcast<P> {
    fn accepted_proof(&self, sender: ProcessId, seq: u64) -> bool {
        seq <= self.delivered_upto(sender) || self.proven.contains_key(&(sender, seq))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quorum_sizes() {
        assert_eq!(quorum(4), 3);
        assert_eq!(quorum(7), 5);
        assert_eq!(quorum(10), 7);
        assert_eq!(quorum(3), 3);
        assert_eq!(quorum(1), 1);
    }
}
