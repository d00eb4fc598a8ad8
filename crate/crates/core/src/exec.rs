//! Routing between data-parallel and sequential execution.
//!
//! Every helper exists in three forms: a routed front (used by the rest of
//! the crate), a `_seq` variant that is always compiled, and a `_par`
//! variant behind the `parallel` feature. Benches call the `_seq`/`_par`
//! pair directly to compare the two.
//!
//! Parallelism is only ever applied as a map over disjoint outputs with
//! sequential reductions inside each item, so results are bitwise identical
//! across thread counts and with the feature disabled.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Caps the global thread pool. Values of 0 leave the pool at its default
/// size. Must run before the first parallel call; later calls are ignored.
pub fn configure_thread_cap(threads: usize) {
    #[cfg(feature = "parallel")]
    if threads > 0 {
        // Ignore the error: the pool can already be initialized, in which
        // case the existing size stays in effect.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}

/// Maps `f` over `items`, preserving order.
pub fn map_vec<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_vec_par(items, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_vec_seq(items, f)
    }
}

pub fn map_vec_seq<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_vec_par<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(f).collect()
}

/// Maps `f` over `items`, stopping at the first error.
pub fn try_map_vec<T, R, E, F>(items: &[T], f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(&T) -> Result<R, E> + Sync + Send,
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

/// Maps `f` over the indices `0..n`, preserving order.
pub fn map_indices<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
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

/// Splits `out` into disjoint rows of `row_len` and fills each by calling
/// `f(row_index, row)`. `out.len()` must be a multiple of `row_len`.
pub fn for_each_row_mut<F>(out: &mut [f64], row_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        for_each_row_mut_par(out, row_len, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        for_each_row_mut_seq(out, row_len, f)
    }
}

pub fn for_each_row_mut_seq<F>(out: &mut [f64], row_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]),
{
    debug_assert_eq!(out.len() % row_len.max(1), 0);
    for (i, row) in out.chunks_mut(row_len).enumerate() {
        f(i, row);
    }
}

#[cfg(feature = "parallel")]
pub fn for_each_row_mut_par<F>(out: &mut [f64], row_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    debug_assert_eq!(out.len() % row_len.max(1), 0);
    out.par_chunks_mut(row_len)
        .enumerate()
        .for_each(|(i, row)| f(i, row));
}
