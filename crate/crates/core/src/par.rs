//! Parallel execution helpers.
//!
//! Every helper here is deterministic: parallel tasks write disjoint output
//! regions and any reduction happens sequentially inside one task, so results
//! are bit-identical to the sequential fallback regardless of thread count.

/// Work below this many output elements is not worth a rayon dispatch.
pub const PAR_MIN_ELEMS: usize = 4096;

/// Apply `f(row_index, row)` to every `row_len`-sized chunk of `out`.
#[inline]
pub fn for_each_row<F>(out: &mut [f32], row_len: usize, f: F)
where
    F: Fn(usize, &mut [f32]) + Sync + Send,
{
    debug_assert!(row_len > 0 && out.len().is_multiple_of(row_len));
    #[cfg(feature = "parallel")]
    {
        if out.len() >= PAR_MIN_ELEMS {
            use rayon::prelude::*;
            out.par_chunks_mut(row_len)
                .enumerate()
                .for_each(|(r, chunk)| f(r, chunk));
            return;
        }
    }
    for (r, chunk) in out.chunks_mut(row_len).enumerate() {
        f(r, chunk);
    }
}

/// Order-preserving map over `0..n`.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Run `f` inside a thread pool of `jobs` threads (`None` = default pool).
///
/// Without the `parallel` feature the closure runs directly and `jobs` is
/// ignored.
pub fn with_jobs<R, F>(jobs: Option<usize>, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        match jobs {
            Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .expect("building a local thread pool cannot fail with valid settings")
                .install(f),
            _ => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        f()
    }
}
