//! Execution strategy for the data-parallel inner loops.
//!
//! Training, generation and evaluation all map independent work items
//! (leaves or trials) to partial results and then merge those results in a
//! fixed order. The merge order never depends on the thread schedule, so for
//! a given seed the sequential and parallel strategies produce bit-identical
//! output.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How to run the per-leaf / per-trial loops.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    /// Plain iterators on the calling thread.
    Sequential,
    /// Rayon work-stealing over the items; results are still merged in
    /// item order.
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        {
            Execution::Parallel
        }
        #[cfg(not(feature = "parallel"))]
        {
            Execution::Sequential
        }
    }
}

/// Maps `f` over `0..n`, returning results in index order.
pub(crate) fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Execution::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
    }
}

/// Caps the rayon worker pool at `threads`. A no-op when the pool was
/// already initialized or when the crate is built without `parallel`.
pub fn init_thread_pool(threads: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
    }
}
