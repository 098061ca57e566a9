//! Data-parallel helpers with a sequential fallback.
//!
//! All search and sweep layers funnel their fan-out through this module.
//! With the `parallel` feature enabled (the default) work is dispatched to
//! rayon unless parallelism has been switched off at run time with
//! [`set_parallel`]; without the feature the sequential code paths are the
//! only ones compiled. Every helper preserves input order, so results are
//! identical no matter how the work is scheduled.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
#[cfg(feature = "parallel")]
use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
static PARALLEL: AtomicBool = AtomicBool::new(true);

/// Enables or disables the rayon code paths at run time.
///
/// A no-op when the crate is built without the `parallel` feature. The
/// benchmark suite uses this to compare both execution modes in one build.
pub fn set_parallel(enabled: bool) {
    #[cfg(feature = "parallel")]
    PARALLEL.store(enabled, Ordering::Relaxed);
    #[cfg(not(feature = "parallel"))]
    let _ = enabled;
}

/// True when work will actually be dispatched to rayon.
pub fn parallel_enabled() -> bool {
    #[cfg(feature = "parallel")]
    {
        PARALLEL.load(Ordering::Relaxed)
    }
    #[cfg(not(feature = "parallel"))]
    {
        false
    }
}

/// Work items below this count stay sequential; splitting overhead swamps
/// the gain on the small inner loops (see the bench suite).
#[cfg(feature = "parallel")]
const MIN_CHUNK: usize = 8;

/// Maps `f` over `0..n`, collecting results in index order.
pub fn map_indexed<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() && n > MIN_CHUNK {
        return (0..n).into_par_iter().with_min_len(MIN_CHUNK).map(f).collect();
    }
    map_indexed_seq(n, f)
}

/// Sequential twin of [`map_indexed`], always available.
pub fn map_indexed_seq<R, F>(n: usize, f: F) -> Vec<R>
where
    F: Fn(usize) -> R,
{
    (0..n).map(f).collect()
}

/// Maps `f` over a slice, collecting results in slice order.
pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() && items.len() > MIN_CHUNK {
        return items.par_iter().with_min_len(MIN_CHUNK).map(f).collect();
    }
    map_slice_seq(items, f)
}

/// Sequential twin of [`map_slice`], always available.
pub fn map_slice_seq<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_indexed_preserves_order() {
        let out = map_indexed(100, |i| i * i);
        assert_eq!(out, (0..100).map(|i| i * i).collect::<Vec<_>>());
        set_parallel(false);
        let seq = map_indexed(100, |i| i * i);
        set_parallel(true);
        assert_eq!(out, seq);
    }

    #[test]
    fn map_slice_matches_sequential() {
        let items: Vec<i64> = (0..57).collect();
        assert_eq!(map_slice(&items, |x| x + 1), map_slice_seq(&items, |x| x + 1));
    }
}
