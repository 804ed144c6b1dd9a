//! Data-parallel loop helpers.
//!
//! The hot loops of the crate (per-batch-element convolutions, tile
//! inference, phantom generation, metric sweeps) are expressed through the
//! helpers below. With the `parallel` feature (default) they run on rayon;
//! without it they degrade to plain sequential iteration. Every helper
//! either writes disjoint output regions or collects results in input order,
//! so the parallel and sequential paths are bit-identical — reductions with
//! a data-dependent order never happen here.
//!
//! [`set_parallel`] is a runtime switch used by the benchmark suite to
//! compare both paths within one build; it is a no-op without the feature.

#[cfg(feature = "parallel")]
use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
static PARALLEL_ENABLED: AtomicBool = AtomicBool::new(true);

/// Enables or disables rayon dispatch at runtime. Returns the previous value.
///
/// Without the `parallel` feature this is a no-op returning `false`.
pub fn set_parallel(enabled: bool) -> bool {
    #[cfg(feature = "parallel")]
    {
        PARALLEL_ENABLED.swap(enabled, Ordering::Relaxed)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = enabled;
        false
    }
}

/// True when loops will actually dispatch to rayon.
pub fn parallel_enabled() -> bool {
    #[cfg(feature = "parallel")]
    {
        PARALLEL_ENABLED.load(Ordering::Relaxed)
    }
    #[cfg(not(feature = "parallel"))]
    {
        false
    }
}

/// Maps `f` over `0..n`, returning results in index order.
pub fn map_indexed<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Maps `f` over the items of a slice, preserving order.
pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}

/// Runs `f(chunk_index, chunk)` over consecutive `chunk_len` slices of `data`.
///
/// Chunks are disjoint, so the write pattern is identical either way.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    assert!(chunk_len > 0);
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        use rayon::prelude::*;
        data.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    data.chunks_mut(chunk_len).enumerate().for_each(|(i, c)| f(i, c));
}

/// Like [`for_each_chunk_mut`], but also collects one result per chunk in
/// chunk order.
pub fn map_chunks_mut<T, U, F>(data: &mut [T], chunk_len: usize, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(usize, &mut [T]) -> U + Sync + Send,
{
    assert!(chunk_len > 0);
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        use rayon::prelude::*;
        return data
            .par_chunks_mut(chunk_len)
            .enumerate()
            .map(|(i, c)| f(i, c))
            .collect();
    }
    data.chunks_mut(chunk_len).enumerate().map(|(i, c)| f(i, c)).collect()
}
