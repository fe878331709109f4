#![allow(dead_code)]

use at2_core::ProcessId;
use at2_net::{AdvCtx, Adversary, Protocol};

type StartFn<M> = Box<dyn FnMut(&mut AdvCtx<'_, M>)>;
type MsgFn<M> = Box<dyn FnMut(&mut AdvCtx<'_, M>, ProcessId, ProcessId, M)>;

/// An adversary driven by closures.
pub struct Scripted<M> {
    pub start: StartFn<M>,
    pub message: MsgFn<M>,
}

impl<M: 'static> Scripted<M> {
    pub fn on_start(f: impl FnMut(&mut AdvCtx<'_, M>) + 'static) -> Self {
        Scripted {
            start: Box::new(f),
            message: Box::new(|_, _, _, _| {}),
        }
    }

    pub fn with_message(mut self, f: impl FnMut(&mut AdvCtx<'_, M>, ProcessId, ProcessId, M) + 'static) -> Self {
        self.message = Box::new(f);
        self
    }
}

impl<P: Protocol> Adversary<P> for Scripted<P::Msg>
where
    P::Msg: 'static,
{
    fn on_start(&mut self, ctx: &mut AdvCtx<'_, P::Msg>) {
        (self.start)(ctx)
    }

    fn on_message(&mut self, ctx: &mut AdvCtx<'_, P::Msg>, to: ProcessId, from: ProcessId, msg: P::Msg) {
        (self.message)(ctx, to, from, msg)
    }
}
