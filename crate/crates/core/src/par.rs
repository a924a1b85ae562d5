//! Data-parallel helpers.
//!
//! With the `parallel` feature (default) these dispatch to rayon; without it they
//! run the same closures sequentially. Reductions use a fixed chunking so that
//! floating-point results do not depend on the thread count or on scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Rows per chunk for reductions. Fixed so summation order is reproducible.
pub const CHUNK_ROWS: usize = 256;

/// `(0..n).map(f).collect()`, in parallel when enabled. Output order is by index.
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

/// Fills `out[i] = f(i)` for every index.
pub fn fill_indexed<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        out.par_iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
    }
    #[cfg(not(feature = "parallel"))]
    {
        out.iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
    }
}

/// Deterministic chunked reduction over `0..n`.
///
/// Each chunk of [`CHUNK_ROWS`] indices is folded by `fold` into a fresh
/// accumulator from `init`; chunk results are then combined left to right
/// with `merge`, independent of how the chunks were scheduled.
pub fn chunked_reduce<A, I, F, M>(n: usize, init: I, fold: F, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(&mut A, usize) + Sync + Send,
    M: Fn(&mut A, A),
{
    let chunks = n.div_ceil(CHUNK_ROWS);
    let partials = map_indexed(chunks, |c| {
        let mut acc = init();
        let end = ((c + 1) * CHUNK_ROWS).min(n);
        for i in c * CHUNK_ROWS..end {
            fold(&mut acc, i);
        }
        acc
    });
    let mut total = init();
    for part in partials {
        merge(&mut total, part);
    }
    total
}

/// Sum of `f(i)` over `0..n` with reproducible ordering.
pub fn sum_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    chunked_reduce(n, || 0.0, |acc, i| *acc += f(i), |acc, part| *acc += part)
}

/// Whether the crate was built with rayon support.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
