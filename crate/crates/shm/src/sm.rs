//! Wait-free asset transfer with at most one owner per account.
//!
//! Every process keeps the set of its own successful transfers in its cell of
//! an atomic snapshot. Since each account has at most one owner, all outgoing
//! transfers of an account live in a single cell.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use at2_core::{
    AccountId, Amount, AssetTransferObject, History, ModelError, Operation, OwnerMap, ProcessId,
    Response, Transfer,
};
use thiserror::Error;

use crate::sched::{Actor, Shared, System};
use crate::snapshot::AtomicSnapshot;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SmError {
    #[error("account {0} has {1} owners; this algorithm allows at most one")]
    SharedAccount(AccountId, usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug)]
pub struct SmConfig {
    pub owners: OwnerMap,
    pub initial: BTreeMap<AccountId, Amount>,
}

impl SmConfig {
    pub fn new(owners: OwnerMap, initial: BTreeMap<AccountId, Amount>) -> Result<Self, SmError> {
        for a in owners.accounts() {
            let count = owners.owners(a)?.len();
            if count > 1 {
                return Err(SmError::SharedAccount(a, count));
            }
        }
        // Normalize through the sequential object so both agree on accounts.
        let obj = AssetTransferObject::new(owners, initial);
        Ok(SmConfig {
            initial: obj.initial.iter().collect(),
            owners: obj.owners,
        })
    }

    pub fn spec(&self) -> AssetTransferObject {
        AssetTransferObject::new(self.owners.clone(), self.initial.clone())
    }

    /// balance(a, S): initial balance plus incoming minus outgoing transfers
    /// found anywhere in the snapshot.
    pub fn balance(&self, account: AccountId, snapshot: &[Option<BTreeSet<Transfer>>]) -> i128 {
        let mut total = self.initial.get(&account).copied().unwrap_or(0) as i128;
        for t in snapshot.iter().flatten().flatten() {
            if t.dest == account {
                total += t.amount as i128;
            }
            if t.source == account {
                total -= t.amount as i128;
            }
        }
        total
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SmMemory {
    pub cfg: Shared<SmConfig>,
    pub snapshot: AtomicSnapshot<BTreeSet<Transfer>>,
    /// Number of snapshots in which some balance was negative.
    pub negative_observations: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Phase {
    Idle,
    Invoked(Operation),
    /// Transfer validated against the snapshot; `ops` already contains it.
    Updating,
    Returning(Response),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SmProcess {
    id: ProcessId,
    program: VecDeque<Operation>,
    /// ops_p, the process's successful outgoing transfers.
    ops: BTreeSet<Transfer>,
    /// Distinguishes repeated transfers with equal (a, b, x).
    next_seq: u64,
    phase: Phase,
}

impl SmProcess {
    pub fn new(id: ProcessId, program: impl IntoIterator<Item = Operation>) -> Self {
        SmProcess {
            id,
            program: program.into_iter().collect(),
            ops: BTreeSet::new(),
            next_seq: 0,
            phase: Phase::Idle,
        }
    }

    pub fn ops(&self) -> &BTreeSet<Transfer> {
        &self.ops
    }

    /// True while an operation is invoked but not yet returned.
    pub fn in_operation(&self) -> bool {
        self.phase != Phase::Idle
    }
}

impl Actor<SmMemory> for SmProcess {
    type Op = Operation;
    type Ret = Response;

    fn step(&mut self, mem: &mut SmMemory, log: &mut History<Operation, Response>) {
        match std::mem::replace(&mut self.phase, Phase::Idle) {
            Phase::Idle => {
                let op = self.program.pop_front().expect("step on finished process");
                log.invoke(self.id, op).expect("one operation at a time");
                self.phase = Phase::Invoked(op);
            }
            Phase::Invoked(op) => {
                let s = mem.snapshot.snapshot();
                if mem.cfg.initial.keys().any(|a| mem.cfg.balance(*a, &s) < 0) {
                    mem.negative_observations += 1;
                }
                self.phase = match op {
                    Operation::Read { account } => {
                        let b = mem.cfg.balance(account, &s).max(0) as Amount;
                        Phase::Returning(Response::Balance(b))
                    }
                    Operation::Transfer {
                        source,
                        dest,
                        amount,
                    } => {
                        if !mem.cfg.owners.is_owner(self.id, source)
                            || mem.cfg.balance(source, &s) < amount as i128
                        {
                            Phase::Returning(Response::Success(false))
                        } else {
                            self.ops
                                .insert(Transfer::new(source, dest, amount, self.next_seq));
                            self.next_seq += 1;
                            Phase::Updating
                        }
                    }
                };
            }
            Phase::Updating => {
                mem.snapshot.update(self.id.index(), self.ops.clone());
                self.phase = Phase::Returning(Response::Success(true));
            }
            Phase::Returning(r) => {
                log.respond(self.id, r).expect("operation was invoked");
            }
        }
    }

    fn is_done(&self) -> bool {
        self.phase == Phase::Idle && self.program.is_empty()
    }
}

/// Steps per operation: invoke, snapshot, optional update, return.
pub const MAX_STEPS_PER_OP: u64 = 4;

pub type SmSystem = System<SmMemory, SmProcess>;

/// Builds a system where process `i` runs `programs[i]`. Every account the
/// programs mention must be known to the configuration.
pub fn sm_system(cfg: SmConfig, programs: Vec<Vec<Operation>>) -> Result<SmSystem, SmError> {
    for op in programs.iter().flatten() {
        let accounts = match *op {
            Operation::Read { account } => vec![account],
            Operation::Transfer { source, dest, .. } => vec![source, dest],
        };
        for a in accounts {
            if !cfg.initial.contains_key(&a) {
                return Err(ModelError::UnknownAccount(a).into());
            }
        }
    }
    let n = programs.len();
    let mem = SmMemory {
        cfg: Shared::new(cfg),
        snapshot: AtomicSnapshot::new(n),
        negative_observations: 0,
    };
    let actors = programs
        .into_iter()
        .enumerate()
        .map(|(i, p)| SmProcess::new(ProcessId(i as u32), p))
        .collect();
    Ok(System::new(mem, actors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use at2_core::Response::{Balance, Success};

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

    fn results(sys: &SmSystem) -> Vec<Response> {
        sys.log
            .operations()
            .into_iter()
            .map(|r| r.returned.unwrap().1)
            .collect()
    }

    fn run_alone(q0: &[(u32, Amount)], n: u32, program: Vec<Operation>, who: usize) -> SmSystem {
        let cfg = SmConfig::new(
            OwnerMap::single_owner(n),
            q0.iter().map(|&(a, x)| (AccountId(a), x)).collect(),
        )
        .unwrap();
        let mut programs = vec![Vec::new(); n as usize];
        programs[who] = program;
        let mut sys = sm_system(cfg, programs).unwrap();
        sys.run_solo(who, 100).unwrap();
        sys
    }

    #[test]
    fn owner_transfer_then_read() {
        let sys = run_alone(&[(0, 10)], 2, vec![transfer(0, 1, 4), read(0)], 0);
        assert_eq!(results(&sys), vec![Success(true), Balance(6)]);
    }

    #[test]
    fn non_owner_fails_and_leaves_snapshot_untouched() {
        let sys = run_alone(&[(0, 10)], 2, vec![transfer(0, 1, 4)], 1);
        assert_eq!(results(&sys), vec![Success(false)]);
        assert_eq!(sys.mem.snapshot.snapshot(), vec![None, None]);
    }

    #[test]
    fn second_spend_sees_reduced_balance() {
        let sys = run_alone(&[(0, 3)], 3, vec![transfer(0, 1, 2), transfer(0, 2, 2)], 0);
        assert_eq!(results(&sys), vec![Success(true), Success(false)]);
    }

    #[test]
    fn incoming_transfer_is_visible_to_reader() {
        let cfg = SmConfig::new(OwnerMap::single_owner(2), [(AccountId(1), 5)].into()).unwrap();
        let mut sys = sm_system(cfg, vec![vec![read(0)], vec![transfer(1, 0, 5)]]).unwrap();
        sys.run_solo(0, 10).unwrap();
        sys.run_solo(1, 10).unwrap();
        let mut sys2 = sys.clone();
        sys2.actors[0] = SmProcess::new(ProcessId(0), [read(0)]);
        sys2.run_solo(0, 10).unwrap();
        let rets = results(&sys2);
        assert_eq!(rets[0], Balance(0));
        assert_eq!(rets[2], Balance(5));
    }

    #[test]
    fn repeated_identical_transfers_are_kept_apart() {
        let sys = run_alone(&[(0, 4)], 2, vec![transfer(0, 1, 2), transfer(0, 1, 2), read(0)], 0);
        assert_eq!(results(&sys), vec![Success(true), Success(true), Balance(0)]);
        assert_eq!(sys.actors[0].ops().len(), 2);
    }

    #[test]
    fn shared_accounts_and_unknown_accounts_are_rejected() {
        let mut owners = OwnerMap::single_owner(2);
        owners.set_owners(AccountId(0), [ProcessId(0), ProcessId(1)]);
        assert_eq!(
            SmConfig::new(owners, BTreeMap::new()).unwrap_err(),
            SmError::SharedAccount(AccountId(0), 2)
        );
        let cfg = SmConfig::new(OwnerMap::single_owner(1), BTreeMap::new()).unwrap();
        assert!(matches!(
            sm_system(cfg, vec![vec![read(4)]]),
            Err(SmError::Model(ModelError::UnknownAccount(AccountId(4))))
        ));
    }
}
