//! Slice-level parallelism helpers.
//!
//! Every fan-out in the pipeline (phantom slices, Stage I masks, per-node
//! classification, overlay rendering) goes through [`map_indices`], so the
//! whole crate switches between rayon and plain iterators in one place.
//! Results are collected in index order, which is what makes output bytes
//! independent of the worker count.
//!
//! With the `parallel` feature disabled, [`ExecMode::Parallel`] degrades to
//! the sequential path and the crate has no rayon dependency at all.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How a fan-out should run. The default follows the crate feature set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    /// Rayon work-stealing pool; falls back to sequential when the
    /// `parallel` feature is off.
    Parallel,
}

impl Default for ExecMode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            ExecMode::Parallel
        } else {
            ExecMode::Sequential
        }
    }
}

/// Apply `f` to every index in `0..n`, returning results in index order.
pub fn map_indices<T, F>(n: usize, mode: ExecMode, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        ExecMode::Sequential => (0..n).map(f).collect(),
        ExecMode::Parallel => map_parallel(n, f),
    }
}

#[cfg(feature = "parallel")]
fn map_parallel<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_parallel<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Run `body` on a rayon pool with `threads` workers (0 = library default).
/// Without the `parallel` feature the body runs on the calling thread and
/// `threads` is ignored.
pub fn with_thread_count<T, F>(threads: usize, body: F) -> T
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    #[cfg(feature = "parallel")]
    {
        if threads == 0 {
            return body();
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("building rayon pool");
        pool.install(body)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        body()
    }
}
