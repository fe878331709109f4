mod common;

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::rc::Rc;

use at2_core::ProcessId;
use at2_net::det::{ack_statement, initial_statement, quorum, DetBroadcast, DetMsg};
use at2_net::runs::{run_det_broadcast, top_ids, Attack};
use at2_net::secure::{BcastEvent, BroadcastNode};
use at2_net::{AdvCtx, SimConfig, Simulation, StopReason};
use common::Scripted;

type Node = BroadcastNode<DetBroadcast<u64>>;
type Msg = DetMsg<u64>;

fn node(n: usize) -> impl FnMut(ProcessId) -> Node {
    move |_| BroadcastNode::new(DetBroadcast::new(n))
}

fn deliveries(trace: &at2_net::SimTrace<Node>, p: ProcessId) -> Vec<(u64, ProcessId, u64, u64)> {
    trace
        .outputs
        .iter()
        .filter(|(_, q, _)| *q == p)
        .filter_map(|(t, _, o)| match o {
            BcastEvent::Deliver { source, seq, payload } => Some((*t, *source, *seq, *payload)),
            BcastEvent::Note(n) => match *n {},
        })
        .collect()
}

#[test]
fn silent_byzantine_does_not_block_delivery() {
    for seed in 0..50 {
        let cfg = SimConfig::new(4, seed).with_byzantine(top_ids(4, 1));
        let r = run_det_broadcast(cfg, Attack::Crash, 3).unwrap();
        assert_eq!(r.stop, StopReason::Quiescent);
        assert!(r.validity && r.agreement && r.integrity && r.no_duplication, "seed {seed}: {r:?}");
        assert!(r.deliveries.values().all(|&d| d == 9));
    }
}

#[test]
fn equivocating_sender_cannot_split_correct_processes() {
    for seed in 0..100 {
        let cfg = SimConfig::new(7, seed).with_byzantine(top_ids(7, 2));
        let r = run_det_broadcast(cfg, Attack::Equivocate, 2).unwrap();
        assert!(r.source_order && r.validity && r.integrity && r.no_duplication, "seed {seed}: {r:?}");
    }
}

#[test]
fn proof_below_quorum_is_rejected() {
    let n = 7;
    assert_eq!(quorum(n), 5);
    let (b1, b2) = (ProcessId(5), ProcessId(6));
    let adv = Scripted::on_start(move |ctx: &mut AdvCtx<'_, Msg>| {
        let payload = 99u64;
        let sender_sig = ctx.sign(b2, &initial_statement(b2, 1, &payload)).unwrap();
        let stmt = ack_statement(b2, 1, &payload);
        let a1 = ctx.sign(b1, &stmt).unwrap();
        let a2 = ctx.sign(b2, &stmt).unwrap();
        let wrong = ctx.sign(b1, &ack_statement(b2, 1, &98u64)).unwrap();
        let proofs = [
            vec![a1, a2],
            // Repeated signatures do not count twice.
            vec![a1, a1, a2, a2, a2],
            // ACKs for another payload do not count.
            vec![a1, a2, wrong, wrong, wrong],
        ];
        for acks in proofs {
            for q in 0..5 {
                let proof = DetMsg::Proof {
                    sender: b2,
                    seq: 1,
                    payload,
                    sender_sig,
                    acks: acks.clone(),
                };
                ctx.send(b2, ProcessId(q), proof).unwrap();
            }
        }
    });
    let cfg = SimConfig::new(n, 3).with_byzantine([b1, b2]);
    let trace = Simulation::new(cfg, node(n), adv).unwrap().run().unwrap();
    assert!(trace.outputs.is_empty());
}

#[test]
fn replayed_proof_is_delivered_once() {
    let adv = Scripted::on_start(|_: &mut AdvCtx<'_, Msg>| {}).with_message(|ctx, to, _, msg| {
        if let DetMsg::Proof { .. } = msg {
            for _ in 0..3 {
                for q in 0..3 {
                    ctx.send(to, ProcessId(q), msg.clone()).unwrap();
                }
            }
        }
    });
    let cfg = SimConfig::new(4, 5).with_byzantine([ProcessId(3)]);
    let mut sim = Simulation::new(cfg, node(4), adv).unwrap();
    sim.schedule_input(0, ProcessId(0), 7).unwrap();
    sim.schedule_input(0, ProcessId(0), 8).unwrap();
    let trace = sim.run().unwrap();
    for p in 0..3 {
        let got: Vec<_> = deliveries(&trace, ProcessId(p)).into_iter().map(|d| (d.1, d.2, d.3)).collect();
        assert_eq!(got, vec![(ProcessId(0), 1, 7), (ProcessId(0), 2, 8)]);
    }
}

#[test]
fn later_proof_waits_for_earlier_one() {
    let b = ProcessId(3);
    let acks: Rc<RefCell<BTreeMap<u64, Vec<at2_net::Signature>>>> = Rc::default();
    let sent: Rc<RefCell<Vec<u64>>> = Rc::default();
    let payload = |seq: u64| 10 * seq;
    let (acks2, sent2) = (acks.clone(), sent.clone());
    let adv = Scripted::on_start(move |ctx: &mut AdvCtx<'_, Msg>| {
        for seq in 1..=2 {
            let sig = ctx.sign(b, &initial_statement(b, seq, &payload(seq))).unwrap();
            for q in 0..3 {
                let m = DetMsg::Initial {
                    sender: b,
                    seq,
                    payload: payload(seq),
                    sig,
                };
                ctx.send(b, ProcessId(q), m).unwrap();
            }
            let own = ctx.sign(b, &ack_statement(b, seq, &payload(seq))).unwrap();
            acks2.borrow_mut().entry(seq).or_default().push(own);
        }
    })
    .with_message(move |ctx, _, _, msg| {
        let DetMsg::Ack { seq, sig, .. } = msg else { return };
        let mut acks = acks.borrow_mut();
        let list = acks.entry(seq).or_default();
        list.push(sig);
        if list.len() != quorum(4) {
            return;
        }
        let sender_sig = ctx.sign(b, &initial_statement(b, seq, &payload(seq))).unwrap();
        // Seq 2 goes out at once, seq 1 much later.
        let delay = if seq == 2 { 1 } else { 500 };
        for q in 0..3 {
            let proof = DetMsg::Proof {
                sender: b,
                seq,
                payload: payload(seq),
                sender_sig,
                acks: list.clone(),
            };
            ctx.send_delayed(b, ProcessId(q), proof, delay).unwrap();
        }
        sent.borrow_mut().push(seq);
    });
    let cfg = SimConfig::new(4, 11).with_byzantine([b]);
    let trace = Simulation::new(cfg, node(4), adv).unwrap().run().unwrap();
    assert_eq!(sent2.borrow().len(), 2);
    for p in 0..3 {
        let got = deliveries(&trace, ProcessId(p));
        assert_eq!(got.iter().map(|d| (d.2, d.3)).collect::<Vec<_>>(), vec![(1, 10), (2, 20)]);
        // Both deliveries happen when the seq 1 proof lands.
        assert_eq!(got[0].0, got[1].0);
        assert!(got[0].0 >= 500);
    }
}
