//! Consensus among k processes from registers and one k-shared
//! asset-transfer object.
//!
//! Account `a` starts at 2k and is owned by processes 1..=k; process p
//! withdraws 2k - p. Any two withdrawals together exceed 2k, so exactly one
//! succeeds, and the remaining balance names the winner.

use at2_core::{
    AccountId, Amount, AssetTransferObject, Balances, History, Operation, OwnerMap, ProcessId,
    Response, SequentialSpec,
};

use crate::kshared::{KSharedClient, KSharedConfig, KSharedError, KSharedMemory};
use crate::sched::{Actor, Shared, System};

pub const SHARED_ACCOUNT: AccountId = AccountId(0);
pub const SINK_ACCOUNT: AccountId = AccountId(1);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    /// The object itself, one step per operation.
    Atomic,
    /// The register and k-consensus construction.
    Implemented,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AtInstance {
    Atomic {
        spec: Shared<AssetTransferObject>,
        state: Balances,
    },
    Implemented(KSharedMemory),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConsensusMemory<V> {
    pub registers: Vec<Option<V>>,
    pub at: AtInstance,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Phase {
    Start,
    Write,
    Transfer { started: bool },
    Read { started: bool },
    ReadRegister(Amount),
    Done,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Proposer<V> {
    id: ProcessId,
    k: usize,
    value: V,
    phase: Phase,
    client: KSharedClient,
}

impl<V> Proposer<V> {
    /// The process number used by the algorithm, 1..=k.
    pub fn number(&self) -> u64 {
        self.id.0 as u64 + 1
    }
}

/// Runs one operation on the object. The atomic backend completes in one
/// call; the implemented one takes as many calls as its steps require.
fn at_step(
    at: &mut AtInstance,
    client: &mut KSharedClient,
    started: &mut bool,
    op: Operation,
) -> Option<Response> {
    match at {
        AtInstance::Atomic { spec, state } => {
            let (next, r) = spec
                .apply(state, client.id(), &op)
                .expect("accounts are fixed by construction");
            *state = next;
            Some(r)
        }
        AtInstance::Implemented(mem) => {
            if !*started {
                client.begin(op);
                *started = true;
            }
            client.step(mem)
        }
    }
}

impl<V: Clone> Actor<ConsensusMemory<V>> for Proposer<V> {
    type Op = V;
    type Ret = Option<V>;

    fn step(&mut self, mem: &mut ConsensusMemory<V>, log: &mut History<V, Option<V>>) {
        let withdrawal = 2 * self.k as Amount - self.number();
        match &mut self.phase {
            Phase::Start => {
                log.invoke(self.id, self.value.clone()).expect("single proposal");
                self.phase = Phase::Write;
            }
            Phase::Write => {
                mem.registers[self.id.index()] = Some(self.value.clone());
                self.phase = Phase::Transfer { started: false };
            }
            Phase::Transfer { started } => {
                let op = Operation::Transfer {
                    source: SHARED_ACCOUNT,
                    dest: SINK_ACCOUNT,
                    amount: withdrawal,
                };
                if at_step(&mut mem.at, &mut self.client, started, op).is_some() {
                    self.phase = Phase::Read { started: false };
                }
            }
            Phase::Read { started } => {
                let op = Operation::Read {
                    account: SHARED_ACCOUNT,
                };
                if let Some(Response::Balance(q)) =
                    at_step(&mut mem.at, &mut self.client, started, op)
                {
                    self.phase = Phase::ReadRegister(q);
                }
            }
            Phase::ReadRegister(q) => {
                // A balance outside 1..=k would be an agreement failure; it
                // surfaces as an undecided (None) result.
                let decided = (*q as usize)
                    .checked_sub(1)
                    .and_then(|i| mem.registers.get(i).cloned().flatten());
                log.respond(self.id, decided).expect("proposal pending");
                self.phase = Phase::Done;
            }
            Phase::Done => panic!("step on finished process"),
        }
    }

    fn is_done(&self) -> bool {
        self.phase == Phase::Done
    }
}

pub type ConsensusSystem<V> = System<ConsensusMemory<V>, Proposer<V>>;

/// Builds the construction for `values.len()` proposers over an object that
/// is configured as `k`-shared. Fails when more than `k` processes would
/// have to share the account.
pub fn consensus_system<V: Clone>(
    k: usize,
    values: Vec<V>,
    backend: Backend,
) -> Result<ConsensusSystem<V>, KSharedError> {
    let n = values.len();
    let mut owners = OwnerMap::new();
    owners.set_owners(SHARED_ACCOUNT, (0..n as u32).map(ProcessId));
    owners.set_owners(SINK_ACCOUNT, []);
    let initial = [(SHARED_ACCOUNT, 2 * n as Amount), (SINK_ACCOUNT, 0)].into();
    let cfg = KSharedConfig::new(k, n, owners, initial)?;
    let at = match backend {
        Backend::Atomic => {
            let spec = cfg.spec();
            AtInstance::Atomic {
                state: spec.initial(),
                spec: Shared::new(spec),
            }
        }
        Backend::Implemented => AtInstance::Implemented(KSharedMemory::new(cfg)),
    };
    let actors = values
        .into_iter()
        .enumerate()
        .map(|(i, value)| Proposer {
            id: ProcessId(i as u32),
            k: n,
            value,
            phase: Phase::Start,
            client: KSharedClient::new(ProcessId(i as u32)),
        })
        .collect();
    let mem = ConsensusMemory {
        registers: vec![None; n],
        at,
    };
    Ok(System::new(mem, actors))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConsensusOutcome<V> {
    pub decisions: Vec<Option<V>>,
    /// Every finished process decided the same value.
    pub agreement: bool,
    /// Every decision is some process's proposal.
    pub validity: bool,
}

/// Agreement and validity over the processes that returned.
pub fn check_consensus<V: Clone + PartialEq>(sys: &ConsensusSystem<V>) -> ConsensusOutcome<V> {
    let proposals: Vec<V> = sys.actors.iter().map(|a| a.value.clone()).collect();
    let decisions: Vec<Option<V>> = sys
        .log
        .operations()
        .into_iter()
        .filter_map(|r| r.returned.map(|(_, v)| v))
        .collect();
    let agreement = decisions.windows(2).all(|w| w[0] == w[1]);
    let validity = decisions
        .iter()
        .all(|d| d.as_ref().is_some_and(|v| proposals.contains(v)));
    ConsensusOutcome {
        decisions,
        agreement,
        validity,
    }
}
