//! Deterministic sharding of sample loops over a worker pool.
//!
//! Work is cut into fixed-size chunks that never depend on the worker
//! count. Chunk `c` draws from `rng.fork(c)` and partial results are merged
//! in chunk order, so output is bit-identical for any number of workers.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Samples per chunk.
pub const CHUNK_SIZE: u64 = 8192;

/// Runs chunked work on `workers` threads.
pub struct Executor {
    workers: usize,
    pool: Option<rayon::ThreadPool>,
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Executor")
            .field("workers", &self.workers)
            .finish()
    }
}

impl Executor {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        let pool = if workers > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(Self { workers, pool })
    }

    /// Single-threaded reference executor.
    pub fn sequential() -> Self {
        Self {
            workers: 1,
            pool: None,
        }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// `f(0), …, f(n−1)` in index order.
    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match &self.pool {
            None => (0..n).map(f).collect(),
            Some(pool) => pool.install(|| (0..n).into_par_iter().map(f).collect()),
        }
    }

    /// Splits `total` samples into chunks and calls `f(chunk_index, len)`.
    pub fn map_chunks<T, F>(&self, total: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64, u64) -> T + Sync + Send,
    {
        let n_chunks = total.div_ceil(CHUNK_SIZE) as usize;
        self.map(n_chunks, |c| {
            let start = c as u64 * CHUNK_SIZE;
            let len = CHUNK_SIZE.min(total - start);
            f(c as u64, len)
        })
    }
}

impl Default for Executor {
    fn default() -> Self {
        Self::sequential()
    }
}

/// Running count, mean and centred sum of squares.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Pushes `count` zeros at once.
    pub fn push_zeros(&mut self, count: u64) {
        self.merge(&Moments {
            n: count,
            mean: 0.0,
            m2: 0.0,
        });
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        self.mean += d * w;
        self.m2 += other.m2 + d * d * self.n as f64 * w;
        self.n = n;
    }

    /// Population variance (divisor `n`).
    pub fn variance(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.m2 / self.n as f64).max(0.0)
        }
    }

    /// Unbiased sample variance (divisor `n − 1`).
    pub fn sample_variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }
}
