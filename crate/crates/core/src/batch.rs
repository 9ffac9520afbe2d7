//! Ordered batch evaluation.
//!
//! Batch members of an estimator can be evaluated concurrently, but the
//! reduction always happens in index order so that results are bit-identical
//! whether or not the `parallel` feature is enabled.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Evaluates `f` for every index in `0..n` sequentially, preserving order.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T + Sync + Send,
    T: Send,
{
    (0..n).map(f).collect()
}

/// Evaluates `f` for every index in `0..n` on the rayon pool, preserving
/// order. Only compiled with the `parallel` feature.
#[cfg(feature = "parallel")]
pub fn map_indexed_par<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T + Sync + Send,
    T: Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Dispatches to the parallel path when enabled, the sequential one
/// otherwise. Callers fold the returned vector in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T + Sync + Send,
    T: Send,
{
    #[cfg(feature = "parallel")]
    {
        // Small batches are not worth a pool round-trip.
        if n >= 192 {
            return map_indexed_par(n, f);
        }
    }
    map_indexed_seq(n, f)
}
