//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature the loops below run on the rayon pool; without
//! it they run in order on the calling thread. Reductions never depend on how
//! work was scheduled: partial sums are formed over fixed-size chunks and then
//! combined with a fixed pairwise tree, so results are bit-identical across
//! thread counts and across the two builds.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length used by every deterministic reduction.
pub const REDUCE_CHUNK: usize = 2048;

/// Maps `f` over `0..n`, returning results in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Maps `f` over a slice, returning results in order.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Calls `f(chunk_index, chunk)` on consecutive mutable chunks of `data`.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }
}

/// Pairwise (tree) sum of a slice in fixed order.
pub fn pairwise_sum<T>(xs: &[T]) -> T
where
    T: Copy + Default + std::ops::Add<Output = T>,
{
    match xs.len() {
        0 => T::default(),
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Deterministic reduction of `f(i)` over `0..n`: sequential sums inside
/// fixed chunks of [`REDUCE_CHUNK`] indices, then a pairwise tree over chunks.
pub fn sum_indexed<T, F>(n: usize, f: F) -> T
where
    T: Copy + Default + Send + std::ops::Add<Output = T>,
    F: Fn(usize) -> T + Sync + Send,
{
    let n_chunks = n.div_ceil(REDUCE_CHUNK);
    let partial = map_indexed(n_chunks, |c| {
        let lo = c * REDUCE_CHUNK;
        let hi = (lo + REDUCE_CHUNK).min(n);
        let mut acc = T::default();
        for i in lo..hi {
            acc = acc + f(i);
        }
        acc
    });
    pairwise_sum(&partial)
}

/// Number of worker threads available to the data-parallel loops.
pub fn threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Caps the global pool size. Has no effect in the sequential build or once
/// the pool has been initialised.
pub fn init_threads(n: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
    }
}
