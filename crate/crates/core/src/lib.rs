//! Shared vocabulary for the AT2 asset-transfer algorithms.
//!
//! This crate holds the value types every other crate speaks in (processes,
//! accounts, transfers, per-account histories), the sequential asset-transfer
//! object used as the reference semantics, and a linearizability checker that
//! validates recorded concurrent histories against it.

pub mod history;
pub mod linearizability;
pub mod model;
pub mod spec;

pub use history::{Event, History, HistoryError};
pub use linearizability::{check_linearizable, SearchBudget, Verdict};
pub use model::{
    balance, AccountHistory, AccountId, Amount, ModelError, OwnerMap, ProcessId, Transfer,
    TransferId, TransferMessage,
};
pub use spec::{AssetTransferObject, Balances, Operation, Response, SequentialSpec};
