//! Data-parallel helpers with a sequential fallback.
//!
//! Rendering, backprop, and occupancy maintenance are all embarrassingly
//! parallel across rays or voxels. With the `parallel` feature (default)
//! the work is spread over the rayon pool; without it the same helpers run
//! sequentially. Results are returned in chunk order, so numeric output is
//! identical no matter how many threads run — determinism comes from the
//! fixed chunking, not from the scheduler.

use std::ops::Range;

/// Fixed chunk width used for ray batches. Gradient buffers are merged in
/// chunk-index order, so this constant is part of the reproducibility
/// contract: changing it changes the fp summation order.
pub const RAY_CHUNK: usize = 256;

/// Splits `0..n` into `chunk`-sized ranges.
pub fn chunk_ranges(n: usize, chunk: usize) -> Vec<Range<usize>> {
    assert!(chunk > 0);
    (0..n.div_ceil(chunk))
        .map(|i| i * chunk..((i + 1) * chunk).min(n))
        .collect()
}

/// Applies `f` to each chunk range of `0..n`, returning results in chunk
/// order. Always sequential; kept unconditionally compiled so benchmarks can
/// compare it against the parallel path.
pub fn map_chunks_seq<T, F>(n: usize, chunk: usize, f: F) -> Vec<T>
where
    F: Fn(Range<usize>) -> T,
{
    chunk_ranges(n, chunk).into_iter().map(f).collect()
}

/// Applies `f` to each chunk range of `0..n` on the rayon pool, returning
/// results in chunk order.
#[cfg(feature = "parallel")]
pub fn map_chunks_par<T, F>(n: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Send + Sync,
{
    use rayon::prelude::*;
    chunk_ranges(n, chunk).into_par_iter().map(f).collect()
}

/// Feature-dispatched chunk map.
pub fn map_chunks<T, F>(n: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        map_chunks_par(n, chunk, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_chunks_seq(n, chunk, f)
    }
}

/// Runs `f` over disjoint mutable chunks of `data`, passing the chunk's
/// starting offset. Used for in-place voxel sweeps.
pub fn for_each_slice_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Send + Sync,
{
    assert!(chunk > 0);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, slice)| f(i * chunk, slice));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (i, slice) in data.chunks_mut(chunk).enumerate() {
            f(i * chunk, slice);
        }
    }
}

/// Configures the global rayon pool to `threads` workers. A no-op without
/// the `parallel` feature, and best-effort if a pool already exists (tests
/// may race to initialize it).
pub fn set_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    {
        if threads > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global();
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
    }
}
