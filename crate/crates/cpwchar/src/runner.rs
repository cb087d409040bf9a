//! Thread-pool runner and wall clock for the core's search loop.

use std::time::Instant;

use anyhow::Result;
use cpwchar_core::exec::{Clock, Runner};
use rayon::prelude::*;

/// Runs jobs on a dedicated rayon pool of a fixed size. Results come back
/// in job order, so parallel and sequential runs agree.
pub struct PoolRunner {
    pool: rayon::ThreadPool,
}

impl PoolRunner {
    /// `workers = 0` means one worker per available core.
    pub fn new(workers: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
        Ok(Self { pool })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Runner for PoolRunner {
    fn run<R, F>(&self, jobs: usize, job: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        self.pool.install(|| (0..jobs).into_par_iter().map(job).collect())
    }
}

pub struct WallClock(Instant);

impl WallClock {
    pub fn start() -> Self {
        Self(Instant::now())
    }
}

impl Clock for WallClock {
    fn now(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}
