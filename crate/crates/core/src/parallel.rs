//! Worker pool handed to the ensemble routines.
//!
//! Work items are indexed; each item derives its own random stream from its
//! index, results are collected in index order and reduced sequentially, so
//! outputs do not depend on the number of workers.

use std::sync::Arc;

use rayon::prelude::*;
use rayon::ThreadPool;

use crate::error::{invalid, Result};

#[derive(Clone, Default)]
pub struct Parallelism {
    pool: Option<Arc<ThreadPool>>,
}

impl std::fmt::Debug for Parallelism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Parallelism({} workers)", self.workers())
    }
}

impl Parallelism {
    /// Runs everything on the calling thread.
    pub fn sequential() -> Self {
        Self { pool: None }
    }

    pub fn with_workers(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(invalid("workers", "must be at least 1"));
        }
        if workers == 1 {
            return Ok(Self::sequential());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| invalid("workers", e.to_string()))?;
        Ok(Self {
            pool: Some(Arc::new(pool)),
        })
    }

    pub fn workers(&self) -> usize {
        self.pool.as_ref().map_or(1, |p| p.current_num_threads())
    }

    /// `(0..n).map(f)` evaluated on the pool, results in index order.
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

    /// Like [`Parallelism::map`] for fallible items; the first error in index
    /// order is returned.
    pub fn try_map<T, F>(&self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        self.map(n, f).into_iter().collect()
    }
}
