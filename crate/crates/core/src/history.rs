use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::ProcessId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HistoryError {
    #[error("{0} invoked an operation while another was pending")]
    AlreadyPending(ProcessId),
    #[error("{0} responded without a pending invocation")]
    NothingPending(ProcessId),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Event<Op, Ret> {
    Invoke { process: ProcessId, op: Op },
    Return { process: ProcessId, ret: Ret },
}

/// A well-formed concurrent history: per process, invocations and responses
/// alternate, starting with an invocation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct History<Op, Ret> {
    events: Vec<Event<Op, Ret>>,
    pending: BTreeMap<ProcessId, usize>,
}

impl<Op, Ret> Default for History<Op, Ret> {
    fn default() -> Self {
        History {
            events: Vec::new(),
            pending: BTreeMap::new(),
        }
    }
}

/// One operation of a history, with the positions of its events.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpRecord<Op, Ret> {
    pub process: ProcessId,
    pub op: Op,
    pub invoked_at: usize,
    pub returned: Option<(usize, Ret)>,
}

impl<Op: Clone, Ret: Clone> History<Op, Ret> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn invoke(&mut self, process: ProcessId, op: Op) -> Result<(), HistoryError> {
        if self.pending.contains_key(&process) {
            return Err(HistoryError::AlreadyPending(process));
        }
        self.pending.insert(process, self.events.len());
        self.events.push(Event::Invoke { process, op });
        Ok(())
    }

    pub fn respond(&mut self, process: ProcessId, ret: Ret) -> Result<(), HistoryError> {
        if self.pending.remove(&process).is_none() {
            return Err(HistoryError::NothingPending(process));
        }
        self.events.push(Event::Return { process, ret });
        Ok(())
    }

    pub fn events(&self) -> &[Event<Op, Ret>] {
        &self.events
    }

    pub fn is_pending(&self, process: ProcessId) -> bool {
        self.pending.contains_key(&process)
    }

    /// Operations in invocation order.
    pub fn operations(&self) -> Vec<OpRecord<Op, Ret>> {
        let mut ops: Vec<OpRecord<Op, Ret>> = Vec::new();
        let mut open: BTreeMap<ProcessId, usize> = BTreeMap::new();
        for (i, e) in self.events.iter().enumerate() {
            match e {
                Event::Invoke { process, op } => {
                    open.insert(*process, ops.len());
                    ops.push(OpRecord {
                        process: *process,
                        op: op.clone(),
                        invoked_at: i,
                        returned: None,
                    });
                }
                Event::Return { process, ret } => {
                    let idx = open
                        .remove(process)
                        .expect("history construction guarantees a pending invocation");
                    ops[idx].returned = Some((i, ret.clone()));
                }
            }
        }
        ops
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequentiality_is_enforced() {
        let mut h: History<u8, u8> = History::new();
        h.invoke(ProcessId(0), 1).unwrap();
        assert_eq!(
            h.invoke(ProcessId(0), 2),
            Err(HistoryError::AlreadyPending(ProcessId(0)))
        );
        assert_eq!(
            h.respond(ProcessId(1), 0),
            Err(HistoryError::NothingPending(ProcessId(1)))
        );
        h.invoke(ProcessId(1), 3).unwrap();
        h.respond(ProcessId(0), 9).unwrap();
        let ops = h.operations();
        assert_eq!(ops.len(), 2);
        assert_eq!(ops[0].returned, Some((2, 9)));
        assert_eq!(ops[1].returned, None);
    }
}
