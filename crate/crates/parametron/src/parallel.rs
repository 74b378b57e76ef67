//! Data-parallel map over independent work items (sweep points, Wigner grid
//! rows, step-halving reruns).
//!
//! With the `parallel` feature (default) the map runs on the rayon pool;
//! without it the same entry point degrades to sequential iteration. The
//! sequential implementation stays available under either configuration so
//! the benchmark suite can compare the two directly. Results are collected in
//! input order, so the output is deterministic either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, in parallel when the `parallel` feature is enabled.
pub fn map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_sequential(items, f)
    }
}

/// The sequential reference path.
pub fn map_sequential<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    F: Fn(T) -> R,
{
    items.into_iter().map(f).collect()
}
