//! Shared-memory asset transfer under a deterministic cooperative scheduler.
//!
//! - [`sm`]: wait-free asset transfer when every account has at most one
//!   owner, over an atomic snapshot.
//! - [`kshared`]: a k-shared asset-transfer object from k-consensus objects.
//! - [`consensus`]: consensus among k processes from a k-shared object.

pub mod consensus;
pub mod kshared;
pub mod sched;
pub mod sm;
pub mod snapshot;
pub mod workload;

pub use sched::{explore, Actor, ExploreStats, SchedError, Shared, System};
pub use snapshot::AtomicSnapshot;
