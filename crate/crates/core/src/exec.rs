//! Execution strategy for independent jobs (search trials).
//!
//! The core runs jobs in order on the calling thread; the std companion
//! crate supplies a thread-pool runner. Results are always returned in job
//! order so downstream merges are deterministic.

use alloc::vec::Vec;

pub trait Runner: Sync {
    fn run<R, F>(&self, jobs: usize, job: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Runner for Sequential {
    fn run<R, F>(&self, jobs: usize, job: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        (0..jobs).map(job).collect()
    }
}

/// Monotonic seconds source for trial timing. The core has no clock of its
/// own; [`NoClock`] reports zero.
pub trait Clock: Sync {
    fn now(&self) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now(&self) -> f64 {
        0.0
    }
}
