//! A k-shared asset-transfer object built from registers, an atomic snapshot
//! and k-consensus objects.
//!
//! Owners of an account announce each outgoing transfer in a per-account
//! register array, then walk a sequence of k-consensus instances that fix the
//! order (and outcome) of the account's outgoing transfers. Any owner may end
//! up committing another owner's announced transfer, which is what keeps
//! owners wait-free when their peers stall.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use at2_core::{
    AccountId, Amount, AssetTransferObject, History, ModelError, Operation, OwnerMap, ProcessId,
    Response,
};
use thiserror::Error;

use crate::sched::{Actor, Shared, System};
use crate::snapshot::AtomicSnapshot;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KSharedError {
    #[error("account {account} has {owners} owners but the object is {k}-shared")]
    TooManyOwners {
        account: AccountId,
        owners: usize,
        k: usize,
    },
    #[error("owner {0} is outside the process set")]
    UnknownOwner(ProcessId),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Returns the first proposal to its first `k` callers and `None` afterwards.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct KConsensusObject<T> {
    k: usize,
    decided: Option<T>,
    invocations: usize,
}

impl<T: Clone> KConsensusObject<T> {
    pub fn new(k: usize) -> Self {
        KConsensusObject {
            k,
            decided: None,
            invocations: 0,
        }
    }

    pub fn propose(&mut self, value: T) -> Option<T> {
        self.invocations += 1;
        if self.invocations > self.k {
            return None;
        }
        Some(self.decided.get_or_insert(value).clone())
    }

    pub fn decided(&self) -> Option<&T> {
        self.decided.as_ref()
    }
}

/// A transfer as announced: (a, b, x, originator, originator's round).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tx {
    pub source: AccountId,
    pub dest: AccountId,
    pub amount: Amount,
    pub proposer: ProcessId,
    pub round: u64,
}

impl Tx {
    /// Age order used to pick the next transfer to commit: lower round
    /// first, ties broken by ascending process id.
    pub fn age(&self) -> (u64, ProcessId) {
        (self.round, self.proposer)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    Success,
    Failure,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Decision {
    pub tx: Tx,
    pub outcome: Outcome,
}

#[derive(Debug)]
pub struct KSharedConfig {
    pub k: usize,
    pub processes: usize,
    pub owners: OwnerMap,
    pub initial: BTreeMap<AccountId, Amount>,
}

impl KSharedConfig {
    pub fn new(
        k: usize,
        processes: usize,
        owners: OwnerMap,
        initial: BTreeMap<AccountId, Amount>,
    ) -> Result<Self, KSharedError> {
        for a in owners.accounts() {
            let set = owners.owners(a)?;
            if set.len() > k {
                return Err(KSharedError::TooManyOwners {
                    account: a,
                    owners: set.len(),
                    k,
                });
            }
            if let Some(p) = set.iter().find(|p| p.index() >= processes) {
                return Err(KSharedError::UnknownOwner(*p));
            }
        }
        let obj = AssetTransferObject::new(owners, initial);
        Ok(KSharedConfig {
            k,
            processes,
            initial: obj.initial.iter().collect(),
            owners: obj.owners,
        })
    }

    pub fn spec(&self) -> AssetTransferObject {
        AssetTransferObject::new(self.owners.clone(), self.initial.clone())
    }

    /// Initial balance plus successful incoming minus successful outgoing
    /// transfers present in any cell of the snapshot.
    pub fn balance(&self, account: AccountId, snapshot: &[Option<BTreeSet<Decision>>]) -> i128 {
        let committed: BTreeSet<&Decision> = snapshot.iter().flatten().flatten().collect();
        let mut total = self.initial.get(&account).copied().unwrap_or(0) as i128;
        for d in committed {
            if d.outcome != Outcome::Success {
                continue;
            }
            if d.tx.dest == account {
                total += d.tx.amount as i128;
            }
            if d.tx.source == account {
                total -= d.tx.amount as i128;
            }
        }
        total
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct KSharedMemory {
    pub cfg: Shared<KSharedConfig>,
    pub snapshot: AtomicSnapshot<BTreeSet<Decision>>,
    /// R_a[i]
    pub announced: BTreeMap<AccountId, Vec<Option<Tx>>>,
    /// kC_a, grown on first access to each round.
    pub consensus: BTreeMap<AccountId, Vec<KConsensusObject<Decision>>>,
}

impl KSharedMemory {
    pub fn new(cfg: KSharedConfig) -> Self {
        let n = cfg.processes;
        KSharedMemory {
            cfg: Shared::new(cfg),
            snapshot: AtomicSnapshot::new(n),
            announced: BTreeMap::new(),
            consensus: BTreeMap::new(),
        }
    }

    /// Every decision visible in some snapshot cell.
    pub fn committed(&self) -> BTreeSet<Decision> {
        self.snapshot.peek().iter().flatten().flatten().copied().collect()
    }

    /// Consensus instances of `account` that have been accessed (and thus
    /// decided).
    pub fn instances(&self, account: AccountId) -> u64 {
        self.consensus.get(&account).map_or(0, |l| l.len() as u64)
    }

    /// Announced transfers not yet decided by any consensus instance.
    pub fn undecided_announcements(&self) -> usize {
        let decided: BTreeSet<Tx> = self
            .consensus
            .values()
            .flatten()
            .filter_map(|c| c.decided().map(|d| d.tx))
            .collect();
        self.announced
            .values()
            .flatten()
            .flatten()
            .filter(|t| !decided.contains(t))
            .count()
    }

    fn propose(&mut self, account: AccountId, round: u64, prop: Decision) -> Option<Decision> {
        let k = self.cfg.k;
        let list = self.consensus.entry(account).or_default();
        while list.len() <= round as usize {
            list.push(KConsensusObject::new(k));
        }
        list[round as usize].propose(prop)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Phase {
    Idle,
    Start(Operation),
    Announced { tx: Tx },
    Collecting { tx: Tx, next: usize, collected: BTreeSet<Tx> },
    /// Loop head; `collected` already excludes committed transfers.
    Looping { tx: Tx, collected: BTreeSet<Tx> },
    Proposing { tx: Tx, collected: BTreeSet<Tx>, prop: Decision },
    Publishing { tx: Tx, collected: BTreeSet<Tx>, decision: Decision },
    Done(Response),
}

/// The per-process state of the construction, driven one shared-memory step
/// at a time. Usable on its own as an operation executor.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct KSharedClient {
    id: ProcessId,
    hist: BTreeSet<Decision>,
    committed: BTreeMap<AccountId, BTreeSet<Tx>>,
    rounds: BTreeMap<AccountId, u64>,
    phase: Phase,
    /// Loop iterations of the current or most recent transfer.
    iterations: u64,
}

impl KSharedClient {
    pub fn new(id: ProcessId) -> Self {
        KSharedClient {
            id,
            hist: BTreeSet::new(),
            committed: BTreeMap::new(),
            rounds: BTreeMap::new(),
            phase: Phase::Idle,
            iterations: 0,
        }
    }

    pub fn id(&self) -> ProcessId {
        self.id
    }

    pub fn is_idle(&self) -> bool {
        self.phase == Phase::Idle
    }

    /// True once the transfer's own announcement is in the register.
    pub fn has_announced(&self) -> bool {
        !matches!(self.phase, Phase::Idle | Phase::Start(_))
    }

    /// round_a: the next consensus instance this process will use for `a`.
    pub fn round(&self, account: AccountId) -> u64 {
        self.rounds.get(&account).copied().unwrap_or(0)
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    pub fn begin(&mut self, op: Operation) {
        assert!(self.is_idle(), "operation already in progress");
        if let Operation::Transfer { .. } = op {
            self.iterations = 0;
        }
        self.phase = Phase::Start(op);
    }

    /// Executes one step; returns the response when the operation completes.
    pub fn step(&mut self, mem: &mut KSharedMemory) -> Option<Response> {
        let me = self.id;
        match std::mem::replace(&mut self.phase, Phase::Idle) {
            Phase::Idle => panic!("no operation in progress"),
            Phase::Start(Operation::Read { account }) => {
                let s = mem.snapshot.snapshot();
                let b = mem.cfg.balance(account, &s).max(0) as Amount;
                self.phase = Phase::Done(Response::Balance(b));
            }
            Phase::Start(Operation::Transfer {
                source,
                dest,
                amount,
            }) => {
                if !mem.cfg.owners.is_owner(me, source) {
                    self.phase = Phase::Done(Response::Success(false));
                    return self.finish();
                }
                let tx = Tx {
                    source,
                    dest,
                    amount,
                    proposer: me,
                    round: *self.rounds.get(&source).unwrap_or(&0),
                };
                let n = mem.cfg.processes;
                mem.announced.entry(source).or_insert_with(|| vec![None; n])[me.index()] =
                    Some(tx);
                self.phase = Phase::Announced { tx };
            }
            Phase::Announced { tx } => {
                self.phase = self.collect_step(mem, tx, 0, BTreeSet::new());
            }
            Phase::Collecting {
                tx,
                next,
                collected,
            } => {
                self.phase = self.collect_step(mem, tx, next, collected);
            }
            Phase::Looping { tx, collected } => {
                self.phase = self.loop_head(mem, tx, collected);
            }
            Phase::Done(_) => unreachable!("completed operations return immediately"),
            Phase::Proposing {
                tx,
                collected,
                prop,
            } => {
                let round = self.rounds.entry(tx.source).or_insert(0);
                let decision = mem
                    .propose(tx.source, *round, prop)
                    .expect("at most k owners access each instance once");
                self.hist.insert(decision);
                self.phase = Phase::Publishing {
                    tx,
                    collected,
                    decision,
                };
            }
            Phase::Publishing {
                tx,
                mut collected,
                decision,
            } => {
                mem.snapshot.update(me.index(), self.hist.clone());
                let committed = self.committed.entry(tx.source).or_default();
                committed.insert(decision.tx);
                collected.retain(|t| !committed.contains(t));
                *self.rounds.entry(tx.source).or_insert(0) += 1;
                self.phase = Phase::Looping { tx, collected };
            }
        }
        self.finish()
    }

    fn finish(&mut self) -> Option<Response> {
        if let Phase::Done(r) = self.phase {
            self.phase = Phase::Idle;
            return Some(r);
        }
        None
    }

    /// Reads one register of R_a; after the last one, enters the loop.
    fn collect_step(
        &mut self,
        mem: &KSharedMemory,
        tx: Tx,
        next: usize,
        mut collected: BTreeSet<Tx>,
    ) -> Phase {
        if let Some(Some(t)) = mem.announced.get(&tx.source).and_then(|r| r.get(next)) {
            collected.insert(*t);
        }
        if next + 1 < mem.cfg.processes {
            return Phase::Collecting {
                tx,
                next: next + 1,
                collected,
            };
        }
        let committed = self.committed.entry(tx.source).or_default();
        collected.retain(|t| !committed.contains(t));
        Phase::Looping { tx, collected }
    }

    /// Loop condition; on entry, the snapshot that builds the proposal.
    fn loop_head(&mut self, mem: &KSharedMemory, tx: Tx, collected: BTreeSet<Tx>) -> Phase {
        if !collected.contains(&tx) {
            let ok = self.hist.contains(&Decision {
                tx,
                outcome: Outcome::Success,
            });
            return Phase::Done(Response::Success(ok));
        }
        self.iterations += 1;
        let req = *collected
            .iter()
            .min_by_key(|t| t.age())
            .expect("contains own transfer");
        let s = mem.snapshot.snapshot();
        let outcome = if mem.cfg.balance(req.source, &s) >= req.amount as i128 {
            Outcome::Success
        } else {
            Outcome::Failure
        };
        Phase::Proposing {
            tx,
            collected,
            prop: Decision { tx: req, outcome },
        }
    }
}

/// A process running a fixed program of operations against the object.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct KSharedProcess {
    client: KSharedClient,
    program: VecDeque<Operation>,
}

impl KSharedProcess {
    pub fn new(id: ProcessId, program: impl IntoIterator<Item = Operation>) -> Self {
        KSharedProcess {
            client: KSharedClient::new(id),
            program: program.into_iter().collect(),
        }
    }

    pub fn client(&self) -> &KSharedClient {
        &self.client
    }

    pub fn push_op(&mut self, op: Operation) {
        self.program.push_back(op);
    }

    pub fn remaining_ops(&self) -> usize {
        self.program.len()
    }
}

impl Actor<KSharedMemory> for KSharedProcess {
    type Op = Operation;
    type Ret = Response;

    fn step(&mut self, mem: &mut KSharedMemory, log: &mut History<Operation, Response>) {
        if self.client.is_idle() {
            let op = self.program.pop_front().expect("step on finished process");
            log.invoke(self.client.id, op).expect("one operation at a time");
            self.client.begin(op);
            return;
        }
        if let Some(r) = self.client.step(mem) {
            log.respond(self.client.id, r).expect("operation was invoked");
        }
    }

    fn is_done(&self) -> bool {
        self.client.is_idle() && self.program.is_empty()
    }
}

pub type KSharedSystem = System<KSharedMemory, KSharedProcess>;

pub fn kshared_system(
    cfg: KSharedConfig,
    programs: Vec<Vec<Operation>>,
) -> Result<KSharedSystem, KSharedError> {
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
    assert_eq!(programs.len(), cfg.processes, "one program per process");
    let actors = programs
        .into_iter()
        .enumerate()
        .map(|(i, p)| KSharedProcess::new(ProcessId(i as u32), p))
        .collect();
    Ok(System::new(KSharedMemory::new(cfg), actors))
}
