//! Seeded random workloads and single-schedule runners.

use at2_core::{
    check_linearizable, AccountId, Amount, Operation, OwnerMap, ProcessId,
    SearchBudget, Verdict,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::consensus::{check_consensus, consensus_system, Backend, ConsensusOutcome};
use crate::kshared::{kshared_system, KSharedConfig, KSharedError};
use crate::sched::Actor;
use crate::sm::{sm_system, SmConfig, SmError};

/// Random operations over `accounts` accounts; transfers mostly spend from
/// `own`.
fn random_program(
    rng: &mut ChaCha8Rng,
    own: AccountId,
    accounts: u32,
    ops: usize,
) -> Vec<Operation> {
    (0..ops)
        .map(|_| {
            if rng.random_bool(0.6) {
                // Occasionally try to spend from someone else's account.
                let source = if rng.random_bool(0.1) {
                    AccountId(rng.random_range(0..accounts))
                } else {
                    own
                };
                Operation::Transfer {
                    source,
                    dest: AccountId(rng.random_range(0..accounts)),
                    amount: rng.random_range(0..=3),
                }
            } else {
                Operation::Read {
                    account: AccountId(rng.random_range(0..accounts)),
                }
            }
        })
        .collect()
}

fn random_balances(rng: &mut ChaCha8Rng, accounts: u32) -> std::collections::BTreeMap<AccountId, Amount> {
    (0..accounts)
        .map(|a| (AccountId(a), rng.random_range(0..=4)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmRun {
    pub verdict: Verdict,
    pub negative_observations: u32,
    pub steps: u64,
    /// Debug rendering of the recorded history, for reproducibility checks.
    pub history: String,
}

/// One random workload under one random schedule, then a linearizability
/// check of the recorded history. Process `p` owns account `p`.
pub fn run_sm(seed: u64, processes: usize, ops_per_process: usize) -> Result<SmRun, SmError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = processes as u32;
    let cfg = SmConfig::new(OwnerMap::single_owner(n), random_balances(&mut rng, n))?;
    let spec = cfg.spec();
    let programs = (0..n)
        .map(|p| random_program(&mut rng, AccountId(p), n, ops_per_process))
        .collect();
    let mut sys = sm_system(cfg, programs)?;
    sys.run_random(&mut rng, u64::MAX)
        .expect("unbounded schedule terminates");
    let verdict = check_linearizable(&spec, &sys.log, SearchBudget::default())?;
    Ok(SmRun {
        verdict,
        negative_observations: sys.mem.negative_observations,
        steps: sys.steps,
        history: format!("{:?}", sys.log.events()),
    })
}

/// Same as [`run_sm`] for the k-shared construction: every account is
/// owned by all `processes` owners (at most `k`).
pub fn run_kshared(
    seed: u64,
    k: usize,
    processes: usize,
    ops_per_process: usize,
) -> Result<Verdict, KSharedError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = processes as u32;
    let mut owners = OwnerMap::new();
    for a in 0..n {
        owners.set_owners(AccountId(a), (0..n).map(ProcessId));
    }
    let cfg = KSharedConfig::new(k, processes, owners, random_balances(&mut rng, n))?;
    let spec = cfg.spec();
    let programs = (0..n)
        .map(|p| random_program(&mut rng, AccountId(p), n, ops_per_process))
        .collect();
    let mut sys = kshared_system(cfg, programs)?;
    sys.run_random(&mut rng, u64::MAX)
        .expect("unbounded schedule terminates");
    check_linearizable(&spec, &sys.log, SearchBudget::default()).map_err(KSharedError::from)
}

/// Consensus among `k` processes through the shared account, under one
/// random schedule.
pub fn run_consensus(
    seed: u64,
    k: usize,
    backend: Backend,
) -> Result<ConsensusOutcome<u64>, KSharedError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..k).map(|_| rng.random_range(0..1000)).collect();
    let mut sys = consensus_system(k, values, backend)?;
    sys.run_random(&mut rng, u64::MAX)
        .expect("unbounded schedule terminates");
    Ok(check_consensus(&sys))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HelpingRun {
    /// The paused owner's transfer was committed by someone else.
    pub helped: bool,
    /// Transfers the active owner ran before that happened.
    pub active_transfers: usize,
    /// Upper bound on `active_transfers` for this configuration.
    pub bound: usize,
}

/// Owner 0 announces a transfer and stops forever; owner 1 keeps issuing
/// its own transfers. Owner 0's transfer must be committed once it is the
/// oldest pending announcement, which takes a bounded number of owner 1's
/// transfers. Other owners stop wherever the random prefix left them.
pub fn run_helping(seed: u64, k: usize) -> Result<HelpingRun, KSharedError> {
    assert!(k >= 2, "helping needs a second owner");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shared = AccountId(0);
    let sink = AccountId(1);
    let mut owners = OwnerMap::new();
    owners.set_owners(shared, (0..k as u32).map(ProcessId));
    owners.set_owners(sink, []);
    let q0 = rng.random_range(0..=8);
    let cfg = KSharedConfig::new(k, k, owners, [(shared, q0), (sink, 0)].into())?;
    let spend = |rng: &mut ChaCha8Rng| Operation::Transfer {
        source: shared,
        dest: sink,
        amount: rng.random_range(0..=3),
    };
    let programs = (0..k)
        .map(|_| {
            let len = rng.random_range(1..=3);
            (0..len).map(|_| spend(&mut rng)).collect()
        })
        .collect();
    let mut sys = kshared_system(cfg, programs)?;
    let prefix = rng.random_range(0..40);
    sys.run_random_prefix(&mut rng, prefix);

    // Drive owner 0 into its last transfer, up to the announcement.
    if sys.actors[0].is_done() {
        sys.actors[0].push_op(spend(&mut rng));
    }
    loop {
        let p0 = &sys.actors[0];
        if p0.remaining_ops() == 0 && p0.client().has_announced() {
            break;
        }
        sys.step(0).expect("owner 0 has work left");
    }
    let target = sys.mem.announced[&shared][0].expect("owner 0 announced");
    let max_round = sys.mem.announced[&shared]
        .iter()
        .flatten()
        .map(|t| t.round)
        .max()
        .unwrap_or(0);
    let bound = max_round as usize + k + 2;

    let committed = |sys: &crate::kshared::KSharedSystem| {
        sys.mem.committed().iter().any(|d| d.tx == target)
    };
    // Let owner 1 finish whatever it was doing first.
    let finish_limit = 1_000;
    sys.run_solo(1, finish_limit).expect("active owner is wait-free");
    let mut active_transfers = 0;
    while !committed(&sys) && active_transfers < bound {
        sys.actors[1].push_op(spend(&mut rng));
        sys.run_solo(1, finish_limit).expect("active owner is wait-free");
        active_transfers += 1;
    }
    Ok(HelpingRun {
        helped: committed(&sys),
        active_transfers,
        bound,
    })
}
