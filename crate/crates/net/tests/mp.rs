use std::collections::BTreeMap;

use at2_core::{AccountId, Amount, ProcessId, TransferMessage};
use at2_net::det::DetBroadcast;
use at2_net::mp::{account_of, At2, At2Input, At2Output};
use at2_net::runs::{max_byzantine, run_at2d, top_ids, Attack, Workload};
use at2_net::secure::NoNote;
use at2_net::{Crash, SimConfig, SimTrace, Simulation, StopReason};

type Node = At2<DetBroadcast<TransferMessage>>;

fn balances(q: &[Amount]) -> BTreeMap<AccountId, Amount> {
    q.iter().enumerate().map(|(i, &a)| (AccountId(i as u32), a)).collect()
}

fn run(n: usize, initial: &[Amount], inputs: Vec<(u64, u32, At2Input)>) -> SimTrace<Node> {
    let initial = balances(initial);
    let cfg = SimConfig::new(n, 17);
    let mut sim = Simulation::new(cfg, |p| At2::new(p, DetBroadcast::new(n), initial.clone()), Crash).unwrap();
    for (at, p, input) in inputs {
        sim.schedule_input(at, ProcessId(p), input).unwrap();
    }
    let trace = sim.run().unwrap();
    assert_eq!(trace.stop, StopReason::Quiescent);
    trace
}

fn resolutions(trace: &SimTrace<Node>, p: u32) -> Vec<(u64, bool)> {
    trace
        .outputs
        .iter()
        .filter(|(_, q, _)| q.0 == p)
        .filter_map(|(t, _, o): &(u64, ProcessId, At2Output<NoNote>)| match o {
            At2Output::Resolved { success, .. } => Some((*t, *success)),
            _ => None,
        })
        .collect()
}

#[test]
fn transfer_moves_funds_everywhere() {
    let trace = run(4, &[10, 0, 0, 0], vec![(0, 0, At2Input::Transfer { dest: AccountId(1), amount: 4 })]);
    assert!(matches!(resolutions(&trace, 0)[..], [(_, true)]));
    for (_, node) in trace.correct_nodes() {
        assert_eq!(node.read(AccountId(0)), 6);
        assert_eq!(node.read(AccountId(1)), 4);
        assert_eq!(node.hist_of(AccountId(0)).count(), 1);
    }
}

#[test]
fn insufficient_balance_fails_immediately() {
    let trace = run(4, &[10, 0, 0, 0], vec![(5, 0, At2Input::Transfer { dest: AccountId(1), amount: 11 })]);
    assert_eq!(resolutions(&trace, 0), vec![(5, false)]);
    assert_eq!(trace.messages, 0);
    for (_, node) in trace.correct_nodes() {
        assert_eq!(node.read(AccountId(0)), 10);
    }
}

#[test]
fn received_funds_can_be_spent() {
    // 1 holds nothing until 0 pays it, then forwards everything to 2.
    let trace = run(
        4,
        &[10, 0, 0, 0],
        vec![
            (0, 0, At2Input::Transfer { dest: AccountId(1), amount: 4 }),
            (1_000, 1, At2Input::Transfer { dest: AccountId(2), amount: 4 }),
        ],
    );
    assert!(matches!(resolutions(&trace, 1)[..], [(_, true)]));
    for (_, node) in trace.correct_nodes() {
        assert_eq!(node.read(AccountId(0)), 6);
        assert_eq!(node.read(AccountId(1)), 0);
        assert_eq!(node.read(AccountId(2)), 4);
    }
    // Spending the incoming transfer consumed it as a dependency.
    assert!(trace.node(ProcessId(1)).unwrap().deps().is_empty());
    let node2 = trace.node(ProcessId(2)).unwrap();
    let t = node2.hist_of(AccountId(1)).find(|t| t.source == account_of(ProcessId(1))).unwrap();
    assert_eq!(t.seq, 1);
}

#[test]
fn spending_before_funds_arrive_fails() {
    let trace = run(
        4,
        &[10, 0, 0, 0],
        vec![
            (0, 1, At2Input::Transfer { dest: AccountId(2), amount: 4 }),
            (0, 0, At2Input::Transfer { dest: AccountId(1), amount: 4 }),
        ],
    );
    assert_eq!(resolutions(&trace, 1), vec![(0, false)]);
}

#[test]
fn scripts_resolve_in_order() {
    let script = vec![(AccountId(1), 3), (AccountId(2), 3), (AccountId(3), 5)];
    let trace = run(4, &[8, 0, 0, 0], vec![(0, 0, At2Input::Script(script))]);
    let r: Vec<bool> = resolutions(&trace, 0).into_iter().map(|r| r.1).collect();
    assert_eq!(r, vec![true, true, false]);
    for (_, node) in trace.correct_nodes() {
        assert_eq!(node.read(AccountId(0)), 2);
        assert!(node.is_settled());
    }
}

#[test]
fn double_spending_sender_is_contained() {
    for n in [4, 7, 10] {
        for seed in 0..100 {
            let cfg = SimConfig::new(n, seed).with_byzantine(top_ids(n, max_byzantine(n)));
            let r = run_at2d(cfg, Attack::Equivocate, Workload::default()).unwrap();
            assert!(r.ok(), "n={n} seed={seed}: {r:?}");
        }
    }
}

#[test]
fn balances_are_conserved() {
    for seed in 0..50 {
        let cfg = SimConfig::new(7, seed);
        let workload = Workload::default();
        let (initial, _) = workload.generate(&cfg);
        let total: i128 = initial.values().map(|&a| a as i128).sum();
        let r = run_at2d(cfg, Attack::Crash, workload).unwrap();
        assert!(r.ok());
        for b in r.balances.values() {
            assert_eq!(b.values().sum::<i128>(), total);
        }
    }
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn safety_and_agreement_hold(
            n in 4usize..=10,
            seed in any::<u64>(),
            transfers in 1usize..5,
            max_delay in 1u64..30,
            equivocate in any::<bool>(),
        ) {
            let mut cfg = SimConfig::new(n, seed).with_byzantine(top_ids(n, max_byzantine(n)));
            cfg.max_delay = max_delay;
            let workload = Workload { transfers, ..Workload::default() };
            let attack = if equivocate { Attack::Equivocate } else { Attack::Crash };
            let r = run_at2d(cfg, attack, workload).unwrap();
            prop_assert!(r.ok(), "{:?}", r);
        }
    }
}
