//! Lock-step cooperative scheduler for shared-memory algorithms.
//!
//! A "process" is an [`Actor`]: a step function that performs exactly one
//! shared-memory access (or one local step such as an invocation or a
//! response) per call. Interleavings are chosen by the scheduler, either at
//! random from a seeded stream or exhaustively.

use std::collections::HashSet;
use std::hash::Hash;
use std::sync::Arc;

use at2_core::{History, ProcessId};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchedError {
    #[error("process {0} did not finish within {1} steps")]
    StepLimit(ProcessId, u64),
    #[error("schedule exceeded {0} steps")]
    ScheduleTooLong(u64),
    #[error("process {0} is not runnable")]
    NotRunnable(ProcessId),
}

pub trait Actor<M> {
    type Op: Clone;
    type Ret: Clone;

    /// Executes one atomic step. Must only be called while `!is_done()`.
    fn step(&mut self, mem: &mut M, log: &mut History<Self::Op, Self::Ret>);

    fn is_done(&self) -> bool;
}

/// Immutable configuration shared by every process and the memory. Equality
/// and hashing ignore it: it never changes during a run.
#[derive(Debug)]
pub struct Shared<T>(pub Arc<T>);

impl<T> Shared<T> {
    pub fn new(value: T) -> Self {
        Shared(Arc::new(value))
    }
}

impl<T> Clone for Shared<T> {
    fn clone(&self) -> Self {
        Shared(Arc::clone(&self.0))
    }
}

impl<T> std::ops::Deref for Shared<T> {
    type Target = T;
    fn deref(&self) -> &T {
        &self.0
    }
}

impl<T> PartialEq for Shared<T> {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl<T> Eq for Shared<T> {}

impl<T> Hash for Shared<T> {
    fn hash<H: std::hash::Hasher>(&self, _: &mut H) {}
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct System<M, A: Actor<M>> {
    pub mem: M,
    pub actors: Vec<A>,
    pub log: History<A::Op, A::Ret>,
    pub steps: u64,
}

impl<M, A: Actor<M>> System<M, A>
where
    A::Op: Clone,
    A::Ret: Clone,
{
    pub fn new(mem: M, actors: Vec<A>) -> Self {
        System {
            mem,
            actors,
            log: History::new(),
            steps: 0,
        }
    }

    pub fn runnable(&self) -> impl Iterator<Item = usize> + '_ {
        self.actors
            .iter()
            .enumerate()
            .filter(|(_, a)| !a.is_done())
            .map(|(i, _)| i)
    }

    pub fn is_finished(&self) -> bool {
        self.actors.iter().all(|a| a.is_done())
    }

    pub fn step(&mut self, i: usize) -> Result<(), SchedError> {
        let actor = &mut self.actors[i];
        if actor.is_done() {
            return Err(SchedError::NotRunnable(ProcessId(i as u32)));
        }
        actor.step(&mut self.mem, &mut self.log);
        self.steps += 1;
        Ok(())
    }

    /// Steps uniformly chosen runnable processes until all are done.
    pub fn run_random<R: Rng>(&mut self, rng: &mut R, max_steps: u64) -> Result<(), SchedError> {
        let mut runnable: Vec<usize> = Vec::with_capacity(self.actors.len());
        loop {
            runnable.clear();
            runnable.extend(self.runnable());
            if runnable.is_empty() {
                return Ok(());
            }
            if self.steps >= max_steps {
                return Err(SchedError::ScheduleTooLong(max_steps));
            }
            let i = runnable[rng.random_range(0..runnable.len())];
            self.step(i)?;
        }
    }

    /// Takes `count` random steps (fewer if everything finishes first).
    pub fn run_random_prefix<R: Rng>(&mut self, rng: &mut R, count: u64) {
        for _ in 0..count {
            let runnable: Vec<usize> = self.runnable().collect();
            if runnable.is_empty() {
                return;
            }
            let i = runnable[rng.random_range(0..runnable.len())];
            self.step(i).expect("chosen from runnable set");
        }
    }

    /// Runs process `i` alone, as if every other process had crashed.
    /// Returns the number of steps it needed.
    pub fn run_solo(&mut self, i: usize, max_steps: u64) -> Result<u64, SchedError> {
        let mut taken = 0;
        while !self.actors[i].is_done() {
            if taken >= max_steps {
                return Err(SchedError::StepLimit(ProcessId(i as u32), max_steps));
            }
            self.step(i)?;
            taken += 1;
        }
        Ok(taken)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExploreStats {
    /// Distinct reachable configurations.
    pub states: u64,
    /// Distinct terminal configurations handed to the visitor.
    pub terminals: u64,
}

/// Explores every interleaving from `initial`, visiting each distinct
/// terminal configuration once. Configurations reached by different
/// schedules are merged, so the visitor sees every reachable outcome
/// without paying for every path.
pub fn explore<M, A, F>(initial: System<M, A>, mut visit: F) -> ExploreStats
where
    M: Clone + Eq + Hash,
    A: Actor<M> + Clone + Eq + Hash,
    A::Op: Clone + Eq + Hash,
    A::Ret: Clone + Eq + Hash,
    F: FnMut(&System<M, A>),
{
    let mut seen: HashSet<(M, Vec<A>, History<A::Op, A::Ret>)> = HashSet::new();
    let mut stack = vec![initial];
    let mut stats = ExploreStats::default();
    while let Some(sys) = stack.pop() {
        let key = (sys.mem.clone(), sys.actors.clone(), sys.log.clone());
        if !seen.insert(key) {
            continue;
        }
        stats.states += 1;
        let runnable: Vec<usize> = sys.runnable().collect();
        if runnable.is_empty() {
            stats.terminals += 1;
            visit(&sys);
            continue;
        }
        for i in runnable {
            let mut next = sys.clone();
            next.step(i).expect("chosen from runnable set");
            stack.push(next);
        }
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Appends its tag to a shared log `left` times, one step each.
    #[derive(Clone, Debug, PartialEq, Eq, Hash)]
    struct Counter {
        tag: u32,
        left: u32,
    }

    impl Actor<Vec<u32>> for Counter {
        type Op = ();
        type Ret = ();
        fn step(&mut self, mem: &mut Vec<u32>, _: &mut History<(), ()>) {
            mem.push(self.tag);
            self.left -= 1;
        }
        fn is_done(&self) -> bool {
            self.left == 0
        }
    }

    #[test]
    fn exhaustive_exploration_counts_interleavings() {
        // Two actors with two steps each: the memory records the full
        // interleaving, so terminals = C(4, 2) = 6.
        let sys = System::new(Vec::new(), vec![Counter { tag: 0, left: 2 }, Counter { tag: 1, left: 2 }]);
        let mut outcomes = HashSet::new();
        let stats = explore(sys, |s| {
            outcomes.insert(s.mem.clone());
        });
        assert_eq!(stats.terminals, 6);
        assert_eq!(outcomes.len(), 6);
    }

    #[test]
    fn random_runs_are_seed_deterministic() {
        let run = |seed| {
            let mut sys = System::new(Vec::new(), vec![Counter { tag: 0, left: 3 }, Counter { tag: 1, left: 3 }]);
            sys.run_random(&mut ChaCha8Rng::seed_from_u64(seed), 100).unwrap();
            sys.mem
        };
        assert_eq!(run(4), run(4));
    }

    #[test]
    fn solo_run_respects_step_limit() {
        let mut sys = System::new(Vec::new(), vec![Counter { tag: 0, left: 3 }]);
        assert_eq!(
            sys.run_solo(0, 2),
            Err(SchedError::StepLimit(ProcessId(0), 2))
        );
        assert_eq!(sys.run_solo(0, 2), Ok(1));
        assert!(sys.step(0).is_err());
    }
}
