//! Deterministic chunked map-reduce over sample indices.
//!
//! Work is split into fixed-size chunks that are reduced in index order, so the
//! floating-point result is identical for any number of worker threads.

pub(crate) const CHUNK: usize = 256;

/// Runs `map` on every chunk `[start, end)` of `0..total` and folds the chunk
/// results left to right with `merge`.
pub(crate) fn chunked_reduce<T, M, R>(total: usize, map: M, merge: R) -> Option<T>
where
    T: Send,
    M: Fn(usize, usize) -> T + Sync,
    R: FnMut(T, T) -> T,
{
    let chunks = total.div_ceil(CHUNK);
    let run = |c: usize| map(c * CHUNK, ((c + 1) * CHUNK).min(total));

    #[cfg(feature = "parallel")]
    let parts: Vec<T> = {
        use rayon::prelude::*;
        (0..chunks).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<T> = (0..chunks).map(run).collect();

    parts.into_iter().reduce(merge)
}

/// Index-ordered parallel search: the smallest `i` in `0..total` for which
/// `probe` returns `Some`.
pub(crate) fn find_first<T, P>(total: usize, probe: P) -> Option<T>
where
    T: Send,
    P: Fn(usize) -> Option<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..total).into_par_iter().find_map_first(probe)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..total).find_map(probe)
    }
}
