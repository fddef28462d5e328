//! Order-preserving data parallelism with a sequential fallback.
//!
//! Work is always split the same way regardless of the thread count and
//! results come back in input order, so any reduction done by the caller
//! over the returned vector is bit-identical across thread counts.

use crate::error::{NashError, Result};

#[cfg(feature = "parallel")]
use std::sync::Arc;

#[derive(Clone)]
pub struct Parallelism {
    threads: usize,
    #[cfg(feature = "parallel")]
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl std::fmt::Debug for Parallelism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Parallelism")
            .field("threads", &self.threads)
            .finish()
    }
}

impl Default for Parallelism {
    fn default() -> Self {
        Parallelism::sequential()
    }
}

impl Parallelism {
    pub fn sequential() -> Self {
        Parallelism {
            threads: 1,
            #[cfg(feature = "parallel")]
            pool: None,
        }
    }

    /// A dedicated pool with `threads` workers. One thread (or a build
    /// without the `parallel` feature) runs everything on the caller.
    pub fn new(threads: usize) -> Result<Self> {
        if threads == 0 {
            return Err(NashError::Config("thread count must be >= 1".into()));
        }
        if threads == 1 {
            return Ok(Parallelism::sequential());
        }
        #[cfg(feature = "parallel")]
        {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| NashError::Config(format!("cannot start thread pool: {e}")))?;
            Ok(Parallelism {
                threads,
                pool: Some(Arc::new(pool)),
            })
        }
        #[cfg(not(feature = "parallel"))]
        {
            log::warn!("built without the `parallel` feature; running {threads} requested threads sequentially");
            Ok(Parallelism::sequential())
        }
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    /// `f(i, &items[i])` for every item, results in input order.
    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect());
        }
        items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
    }

    /// Like [`map`](Self::map) over `0..n`.
    pub fn map_range<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        let idx: Vec<usize> = (0..n).collect();
        self.map(&idx, |_, &i| f(i))
    }

    /// Maps fixed-size chunks of `items` and returns one result per chunk,
    /// in order. The chunking depends only on `chunk`, never on the thread
    /// count.
    pub fn map_chunks<T, R, F>(&self, items: &[T], chunk: usize, f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&[T]) -> R + Sync + Send,
    {
        let chunks: Vec<&[T]> = items.chunks(chunk.max(1)).collect();
        self.map(&chunks, |_, c| f(c))
    }

    /// Fallible [`map`](Self::map); the first error in input order wins.
    pub fn try_map<T, R, F>(&self, items: &[T], f: F) -> Result<Vec<R>>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> Result<R> + Sync + Send,
    {
        self.map(items, f).into_iter().collect()
    }
}
