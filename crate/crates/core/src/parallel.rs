//! Data-parallel map over independent work items.
//!
//! With the `parallel` feature, [`Execution::Parallel`] runs on a dedicated
//! rayon pool; without it every execution mode is a plain sequential loop.
//! Results always come back in input order, so callers fold them
//! deterministically regardless of worker count.

use std::num::NonZeroUsize;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Rayon workers; `None` uses one per available core.
    #[default]
    Parallel,
    ParallelWith(NonZeroUsize),
}

impl Execution {
    /// `Some(1)` means sequential, `None` all cores.
    pub fn from_jobs(jobs: Option<usize>) -> Self {
        match jobs.and_then(NonZeroUsize::new) {
            Some(n) if n.get() == 1 => Execution::Sequential,
            Some(n) => Execution::ParallelWith(n),
            None => Execution::Parallel,
        }
    }
}

/// `items.iter().map(f)` under the chosen execution mode.
pub fn map<T, R, F>(exec: Execution, items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        Execution::Sequential => Ok(items.iter().map(f).collect()),
        #[cfg(feature = "parallel")]
        Execution::Parallel => Ok(par(items, f)),
        #[cfg(feature = "parallel")]
        Execution::ParallelWith(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.get())
                .build()
                .map_err(|e| crate::error::Error::contract(format!("thread pool: {e}")))?;
            Ok(pool.install(|| par(items, f)))
        }
        #[cfg(not(feature = "parallel"))]
        _ => Ok(items.iter().map(f).collect()),
    }
}

#[cfg(feature = "parallel")]
fn par<T: Sync, R: Send, F: Fn(&T) -> R + Sync + Send>(items: &[T], f: F) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}
