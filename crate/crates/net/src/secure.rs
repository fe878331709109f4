//! The secure broadcast interface shared by the deterministic and the
//! probabilistic stacks, and a node wrapper to run either one on its own.

use std::convert::Infallible;
use std::fmt::Debug;
use std::hash::Hash;

use at2_core::ProcessId;

use crate::sim::{Ctx, Message, Protocol};

/// What a broadcast layer reports back to the layer above.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BcastEvent<P, N> {
    /// `seq` counts from 1 per source.
    Deliver { source: ProcessId, seq: u64, payload: P },
    /// Layer-specific observation, e.g. becoming ready for a message.
    Note(N),
}

pub type Events<B> = Vec<BcastEvent<<B as SecureBroadcast>::Payload, <B as SecureBroadcast>::Note>>;

/// Multi-shot broadcast with per-source ordered delivery.
///
/// Handlers take a context with any output type because the layer never
/// emits directly; it returns events for the caller to act on.
pub trait SecureBroadcast {
    type Msg: Message;
    type Payload: Clone + Debug + Hash + Eq;
    type Note: Clone + Debug + Hash;

    fn init<O>(&mut self, ctx: &mut Ctx<'_, Self::Msg, O>) -> Events<Self>;
    fn broadcast<O>(&mut self, ctx: &mut Ctx<'_, Self::Msg, O>, payload: Self::Payload) -> Events<Self>;
    fn on_message<O>(&mut self, ctx: &mut Ctx<'_, Self::Msg, O>, from: ProcessId, msg: Self::Msg) -> Events<Self>;
}

/// A process that only broadcasts and delivers.
#[derive(Debug, Clone)]
pub struct BroadcastNode<B> {
    pub layer: B,
}

impl<B> BroadcastNode<B> {
    pub fn new(layer: B) -> Self {
        BroadcastNode { layer }
    }
}

impl<B: SecureBroadcast> BroadcastNode<B> {
    fn relay(ctx: &mut Ctx<'_, B::Msg, BcastEvent<B::Payload, B::Note>>, events: Events<B>) {
        for e in events {
            ctx.emit(e);
        }
    }
}

impl<B: SecureBroadcast> Protocol for BroadcastNode<B> {
    type Msg = B::Msg;
    type Input = B::Payload;
    type Output = BcastEvent<B::Payload, B::Note>;

    fn init(&mut self, ctx: &mut Ctx<'_, Self::Msg, Self::Output>) {
        let ev = self.layer.init(ctx);
        Self::relay(ctx, ev);
    }

    fn on_message(&mut self, ctx: &mut Ctx<'_, Self::Msg, Self::Output>, from: ProcessId, msg: Self::Msg) {
        let ev = self.layer.on_message(ctx, from, msg);
        Self::relay(ctx, ev);
    }

    fn on_input(&mut self, ctx: &mut Ctx<'_, Self::Msg, Self::Output>, payload: B::Payload) {
        let ev = self.layer.broadcast(ctx, payload);
        Self::relay(ctx, ev);
    }
}

/// Notes for layers that have nothing to report.
pub type NoNote = Infallible;
