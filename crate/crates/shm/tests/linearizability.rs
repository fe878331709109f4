//! Recorded histories of both shared-memory implementations must linearize
//! against the sequential object, under random and exhaustive schedules.

use std::collections::BTreeSet;

use at2_core::{
    check_linearizable, AccountId, Amount, Operation, OwnerMap, ProcessId, Response,
    SearchBudget, Verdict,
};
use at2_shm::kshared::{kshared_system, KSharedConfig};
use at2_shm::sm::{sm_system, SmConfig};
use at2_shm::workload::{run_kshared, run_sm};
use at2_shm::explore;
use proptest::prelude::*;

fn transfer(a: u32, b: u32, x: Amount) -> Operation {
    Operation::Transfer {
        source: AccountId(a),
        dest: AccountId(b),
        amount: x,
    }
}

fn read(a: u32) -> Operation {
    Operation::Read {
        account: AccountId(a),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn single_owner_histories_linearize(seed in any::<u64>(), procs in 1usize..=3, ops in 1usize..=2) {
        let run = run_sm(seed, procs, ops).unwrap();
        prop_assert_eq!(run.verdict, Verdict::Linearizable, "{}", run.history);
        prop_assert_eq!(run.negative_observations, 0);
    }

    #[test]
    fn k_shared_histories_linearize(seed in any::<u64>(), ops in 1usize..=2) {
        prop_assert_eq!(run_kshared(seed, 2, 2, ops).unwrap(), Verdict::Linearizable);
    }
}

#[test]
fn every_schedule_of_a_small_single_owner_workload_linearizes() {
    let cfg = SmConfig::new(
        OwnerMap::single_owner(2),
        [(AccountId(0), 3), (AccountId(1), 1)].into(),
    )
    .unwrap();
    let spec = cfg.spec();
    let sys = sm_system(
        cfg,
        vec![
            vec![transfer(0, 1, 2), read(1), transfer(0, 1, 2)],
            vec![transfer(1, 0, 1), read(0), transfer(1, 0, 3)],
        ],
    )
    .unwrap();
    let mut bad = 0;
    let stats = explore(sys, |s| {
        assert_eq!(s.mem.negative_observations, 0);
        if check_linearizable(&spec, &s.log, SearchBudget::default()).unwrap()
            != Verdict::Linearizable
        {
            bad += 1;
        }
    });
    assert!(stats.terminals > 100, "{stats:?}");
    assert_eq!(bad, 0);
}

#[test]
fn read_concurrent_with_incoming_transfer_sees_old_or_new_balance() {
    let cfg = SmConfig::new(OwnerMap::single_owner(2), [(AccountId(1), 5)].into()).unwrap();
    let spec = cfg.spec();
    let sys = sm_system(cfg, vec![vec![read(0)], vec![transfer(1, 0, 5)]]).unwrap();
    let mut seen = BTreeSet::new();
    explore(sys, |s| {
        assert_eq!(
            check_linearizable(&spec, &s.log, SearchBudget::default()).unwrap(),
            Verdict::Linearizable
        );
        let ops = s.log.operations();
        let r = ops.iter().find(|o| o.process == ProcessId(0)).unwrap();
        seen.insert(r.returned.unwrap().1);
    });
    assert_eq!(
        seen,
        [Response::Balance(0), Response::Balance(5)].into()
    );
}

#[test]
fn every_schedule_of_a_small_k_shared_workload_linearizes() {
    let mut owners = OwnerMap::new();
    owners.set_owners(AccountId(0), [ProcessId(0), ProcessId(1)]);
    owners.set_owners(AccountId(1), [ProcessId(1)]);
    let cfg = KSharedConfig::new(2, 2, owners, [(AccountId(0), 4), (AccountId(1), 1)].into())
        .unwrap();
    let spec = cfg.spec();
    let sys = kshared_system(
        cfg,
        vec![
            vec![transfer(0, 1, 3), read(1)],
            vec![transfer(0, 1, 2), transfer(1, 0, 2)],
        ],
    )
    .unwrap();
    let mut bad = 0;
    let stats = explore(sys, |s| {
        if check_linearizable(&spec, &s.log, SearchBudget::default()).unwrap()
            != Verdict::Linearizable
        {
            bad += 1;
        }
    });
    assert!(stats.terminals > 100, "{stats:?}");
    assert_eq!(bad, 0);
}

#[test]
fn racing_owners_overdrawing_the_account_get_exactly_one_success() {
    let mut owners = OwnerMap::new();
    owners.set_owners(AccountId(0), [ProcessId(0), ProcessId(1)]);
    owners.set_owners(AccountId(1), []);
    let cfg = KSharedConfig::new(2, 2, owners, [(AccountId(0), 4)].into()).unwrap();
    let sys = kshared_system(cfg, vec![vec![transfer(0, 1, 3)], vec![transfer(0, 1, 2)]]).unwrap();
    let stats = explore(sys, |s| {
        let successes = s
            .log
            .operations()
            .iter()
            .filter(|o| o.returned.unwrap().1 == Response::Success(true))
            .count();
        assert_eq!(successes, 1);
    });
    assert!(stats.terminals > 1);
}
