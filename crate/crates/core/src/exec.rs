//! Data-parallel helpers with a sequential fallback.
//!
//! Reductions are chunked at fixed boundaries and the per-chunk partial
//! results are folded in index order, so every result is bit-identical
//! regardless of how many worker threads run the map stage — or whether
//! the `parallel` feature is compiled in at all.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Environment variable capping data-parallel width (0 = auto).
pub const THREADS_ENV: &str = "WILDCURRENTS_THREADS";

/// Fixed chunk length for deterministic reductions.
pub const CHUNK: usize = 4096;

/// Map `f` over `0..n`, preserving index order in the output.
pub fn map_collect<T, F>(n: usize, f: F) -> Vec<T>
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

/// Sum `f(i)` over `0..n` with schedule-independent grouping.
pub fn sum_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let partials = map_collect(chunks, |c| {
        let lo = c * CHUNK;
        let hi = ((c + 1) * CHUNK).min(n);
        let mut acc = 0.0;
        for i in lo..hi {
            acc += f(i);
        }
        acc
    });
    partials.iter().sum()
}

/// Like [`sum_indexed`] but accumulating a fixed-size vector of sums.
pub fn sum_indexed_multi<const K: usize, F>(n: usize, f: F) -> [f64; K]
where
    F: Fn(usize) -> [f64; K] + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let partials = map_collect(chunks, |c| {
        let lo = c * CHUNK;
        let hi = ((c + 1) * CHUNK).min(n);
        let mut acc = [0.0; K];
        for i in lo..hi {
            let v = f(i);
            for k in 0..K {
                acc[k] += v[k];
            }
        }
        acc
    });
    let mut out = [0.0; K];
    for p in partials {
        for k in 0..K {
            out[k] += p[k];
        }
    }
    out
}

/// Configure the global thread pool from [`THREADS_ENV`].
///
/// Unset or `0` leaves the pool at its automatic width. Errors from a
/// pool that was already initialized are ignored. Without the
/// `parallel` feature this only validates the variable.
pub fn init_threads_from_env() -> usize {
    let requested = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .unwrap_or(0);
    #[cfg(feature = "parallel")]
    {
        if requested > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(requested)
                .build_global();
        }
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = requested;
        1
    }
}
