//! Message-passing side of AT2: a deterministic network simulator, the
//! deterministic and probabilistic secure broadcast stacks, and the transfer
//! engine that runs on top of either of them.

pub mod adversary;
pub mod auth;
pub mod check;
pub mod det;
pub mod mp;
pub mod prob;
pub mod runs;
pub mod scenario;
pub mod secure;
pub mod sim;

pub use auth::Signature;
pub use scenario::Scenario;
pub use sim::{
    Adversary, AdvCtx, Crash, Ctx, LinkView, Message, Protocol, SimConfig, SimError, SimTrace,
    Simulation, StopReason,
};
