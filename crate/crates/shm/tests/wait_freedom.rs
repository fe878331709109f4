//! Pausing every process but one, at arbitrary points, must not stop the
//! remaining one from finishing its operations in a bounded number of steps.

use at2_core::{AccountId, Operation, OwnerMap, ProcessId};
use at2_shm::kshared::{kshared_system, KSharedConfig};
use at2_shm::sm::{sm_system, SmConfig, MAX_STEPS_PER_OP};
use at2_shm::workload::run_helping;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spend(rng: &mut ChaCha8Rng, accounts: u32, own: u32) -> Operation {
    if rng.random_bool(0.7) {
        Operation::Transfer {
            source: AccountId(own),
            dest: AccountId(rng.random_range(0..accounts)),
            amount: rng.random_range(0..=3),
        }
    } else {
        Operation::Read {
            account: AccountId(rng.random_range(0..accounts)),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn single_owner_process_finishes_alone(seed in any::<u64>(), prefix in 0u64..30, who in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = SmConfig::new(
            OwnerMap::single_owner(3),
            (0..3).map(|a| (AccountId(a), rng.random_range(0..5))).collect(),
        ).unwrap();
        let programs = (0..3)
            .map(|p| (0..4).map(|_| spend(&mut rng, 3, p)).collect())
            .collect();
        let mut sys = sm_system(cfg, programs).unwrap();
        sys.run_random_prefix(&mut rng, prefix);
        // At most the current operation plus the four in the program.
        let bound = 5 * MAX_STEPS_PER_OP;
        prop_assert!(sys.run_solo(who, bound).is_ok());
    }

    #[test]
    fn k_shared_owner_commits_within_announced_plus_one_rounds(
        seed in any::<u64>(),
        prefix in 0u64..80,
        k in 2usize..=4,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut owners = OwnerMap::new();
        owners.set_owners(AccountId(0), (0..k as u32).map(ProcessId));
        owners.set_owners(AccountId(1), []);
        let cfg = KSharedConfig::new(k, k, owners, [(AccountId(0), rng.random_range(0..8))].into())
            .unwrap();
        let programs = (0..k)
            .map(|_| (0..3).map(|_| Operation::Transfer {
                source: AccountId(0),
                dest: AccountId(1),
                amount: rng.random_range(0..=3),
            }).collect())
            .collect();
        let mut sys = kshared_system(cfg, programs).unwrap();
        sys.run_random_prefix(&mut rng, prefix);
        let who = rng.random_range(0..k);
        // Everyone else is now paused for good. Finish the operation `who`
        // was in, then bound each later transfer's rounds by the instances
        // it must catch up on plus the announcements still undecided.
        let mut steps = 0;
        while !sys.actors[who].client().is_idle() {
            sys.step(who).unwrap();
            steps += 1;
            prop_assert!(steps < 10_000);
        }
        while sys.actors[who].remaining_ops() > 0 {
            let lag = sys.mem.instances(AccountId(0)) - sys.actors[who].client().round(AccountId(0));
            let undecided = sys.mem.undecided_announcements() as u64;
            sys.step(who).unwrap();
            while !sys.actors[who].client().is_idle() {
                sys.step(who).unwrap();
            }
            let iterations = sys.actors[who].client().iterations();
            prop_assert!(
                iterations <= lag + undecided + 1,
                "iterations {} lag {} undecided {}", iterations, lag, undecided
            );
        }
    }
}

#[test]
fn paused_owner_is_helped_in_every_targeted_run() {
    for k in 2..=4 {
        for seed in 0..300 {
            let run = run_helping(seed, k).unwrap();
            assert!(run.helped, "k={k} seed={seed}: {run:?}");
            assert!(run.active_transfers <= run.bound);
        }
    }
}
