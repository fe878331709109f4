//! Wing-Gong style linearizability search with memoization.
//!
//! The search looks for a total order over the operations of a history that
//! (1) respects real-time precedence, (2) includes every completed operation,
//! (3) may include or drop each pending operation, and (4) is legal for the
//! sequential specification, with completed operations returning exactly
//! their recorded responses. Configurations `(linearized set, state)` that
//! were already shown to be dead ends are cached.

use std::collections::HashSet;

use crate::history::History;
use crate::model::ModelError;
use crate::spec::SequentialSpec;

/// Histories are limited to this many operations (one bit each).
pub const MAX_OPERATIONS: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Linearizable,
    NotLinearizable,
    /// The node budget ran out before the search finished.
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchBudget {
    pub max_nodes: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_nodes: 5_000_000,
        }
    }
}

struct Search<'a, S: SequentialSpec> {
    spec: &'a S,
    ops: Vec<crate::history::OpRecord<S::Op, S::Ret>>,
    preds: Vec<u128>,
    required: u128,
    dead: HashSet<(u128, S::State)>,
    nodes: u64,
    budget: u64,
}

enum Outcome {
    Found,
    Exhausted,
    OutOfBudget,
}

impl<S: SequentialSpec> Search<'_, S> {
    fn run(&mut self, done: u128, state: &S::State) -> Result<Outcome, ModelError> {
        if done & self.required == self.required {
            return Ok(Outcome::Found);
        }
        if self.dead.contains(&(done, state.clone())) {
            return Ok(Outcome::Exhausted);
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            return Ok(Outcome::OutOfBudget);
        }
        for i in 0..self.ops.len() {
            let bit = 1u128 << i;
            if done & bit != 0 || self.preds[i] & !done != 0 {
                continue;
            }
            let rec = &self.ops[i];
            let (next, ret) = self.spec.apply(state, rec.process, &rec.op)?;
            if let Some((_, expected)) = &rec.returned {
                if *expected != ret {
                    continue;
                }
            }
            match self.run(done | bit, &next)? {
                Outcome::Exhausted => {}
                other => return Ok(other),
            }
        }
        self.dead.insert((done, state.clone()));
        Ok(Outcome::Exhausted)
    }
}

/// Decides whether `history` is linearizable with respect to `spec`.
///
/// Errors only when the specification itself rejects an operation (for
/// instance an unknown account) or the history exceeds [`MAX_OPERATIONS`].
pub fn check_linearizable<S: SequentialSpec>(
    spec: &S,
    history: &History<S::Op, S::Ret>,
    budget: SearchBudget,
) -> Result<Verdict, ModelError>
where
    S::Op: Clone,
{
    let ops = history.operations();
    if ops.len() > MAX_OPERATIONS {
        return Ok(Verdict::Inconclusive);
    }
    let mut preds = vec![0u128; ops.len()];
    let mut required = 0u128;
    for (j, b) in ops.iter().enumerate() {
        if b.returned.is_some() {
            required |= 1 << j;
        }
        for (i, a) in ops.iter().enumerate() {
            if let Some((ret_at, _)) = a.returned {
                if ret_at < b.invoked_at {
                    preds[j] |= 1 << i;
                }
            }
        }
    }
    let mut search = Search {
        spec,
        ops,
        preds,
        required,
        dead: HashSet::new(),
        nodes: 0,
        budget: budget.max_nodes,
    };
    let initial = spec.initial();
    Ok(match search.run(0, &initial)? {
        Outcome::Found => Verdict::Linearizable,
        Outcome::Exhausted => Verdict::NotLinearizable,
        Outcome::OutOfBudget => Verdict::Inconclusive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AccountId, Amount, OwnerMap, ProcessId};
    use crate::spec::{AssetTransferObject, Operation, Response};

    fn object(q0: &[(u32, Amount)]) -> AssetTransferObject {
        AssetTransferObject::new(
            OwnerMap::single_owner(3),
            q0.iter().map(|&(a, x)| (AccountId(a), x)).collect(),
        )
    }

    fn transfer(s: u32, d: u32, x: Amount) -> Operation {
        Operation::Transfer {
            source: AccountId(s),
            dest: AccountId(d),
            amount: x,
        }
    }

    #[test]
    fn sequential_history_is_its_own_witness() {
        let obj = object(&[(0, 1)]);
        let mut h = History::new();
        h.invoke(ProcessId(0), transfer(0, 1, 1)).unwrap();
        h.respond(ProcessId(0), Response::Success(true)).unwrap();
        assert_eq!(
            check_linearizable(&obj, &h, SearchBudget::default()),
            Ok(Verdict::Linearizable)
        );
    }

    #[test]
    fn double_spend_is_rejected() {
        // One owner, two overlapping invocations of the same spend.
        let obj = object(&[(0, 1)]);
        let mut h = History::new();
        h.invoke(ProcessId(0), transfer(0, 1, 1)).unwrap();
        h.invoke(ProcessId(1), transfer(0, 1, 1)).unwrap();
        h.respond(ProcessId(0), Response::Success(true)).unwrap();
        h.respond(ProcessId(1), Response::Success(true)).unwrap();
        assert_eq!(
            check_linearizable(&obj, &h, SearchBudget::default()),
            Ok(Verdict::NotLinearizable)
        );
    }

    #[test]
    fn overlapping_read_of_old_balance_linearizes_first() {
        let obj = object(&[(0, 5)]);
        let mut h = History::new();
        h.invoke(ProcessId(0), transfer(0, 1, 2)).unwrap();
        h.invoke(ProcessId(1), Operation::Read { account: AccountId(0) }).unwrap();
        h.respond(ProcessId(0), Response::Success(true)).unwrap();
        h.respond(ProcessId(1), Response::Balance(5)).unwrap();
        assert_eq!(
            check_linearizable(&obj, &h, SearchBudget::default()),
            Ok(Verdict::Linearizable)
        );
    }

    #[test]
    fn stale_read_after_completion_is_rejected() {
        let obj = object(&[(0, 5)]);
        let mut h = History::new();
        h.invoke(ProcessId(0), transfer(0, 1, 2)).unwrap();
        h.respond(ProcessId(0), Response::Success(true)).unwrap();
        h.invoke(ProcessId(1), Operation::Read { account: AccountId(0) }).unwrap();
        h.respond(ProcessId(1), Response::Balance(5)).unwrap();
        assert_eq!(
            check_linearizable(&obj, &h, SearchBudget::default()),
            Ok(Verdict::NotLinearizable)
        );
    }

    #[test]
    fn pending_transfer_may_take_effect() {
        // The read observes a transfer whose invocation never returned.
        let obj = object(&[(0, 5)]);
        let mut h = History::new();
        h.invoke(ProcessId(0), transfer(0, 1, 2)).unwrap();
        h.invoke(ProcessId(1), Operation::Read { account: AccountId(1) }).unwrap();
        h.respond(ProcessId(1), Response::Balance(2)).unwrap();
        assert_eq!(
            check_linearizable(&obj, &h, SearchBudget::default()),
            Ok(Verdict::Linearizable)
        );
    }

    #[test]
    fn tiny_budget_is_inconclusive() {
        let obj = object(&[(0, 5)]);
        let mut h = History::new();
        h.invoke(ProcessId(0), transfer(0, 1, 2)).unwrap();
        h.respond(ProcessId(0), Response::Success(true)).unwrap();
        assert_eq!(
            check_linearizable(&obj, &h, SearchBudget { max_nodes: 0 }),
            Ok(Verdict::Inconclusive)
        );
    }

    #[test]
    fn unknown_account_is_an_error_not_a_verdict() {
        let obj = object(&[(0, 5)]);
        let mut h = History::new();
        h.invoke(ProcessId(0), Operation::Read { account: AccountId(9) }).unwrap();
        h.respond(ProcessId(0), Response::Balance(0)).unwrap();
        assert!(check_linearizable(&obj, &h, SearchBudget::default()).is_err());
    }
}
