//! Data-parallel helpers with a sequential fallback.
//!
//! Every reduction splits its index range into fixed-size chunks and combines
//! the chunk partials in order, so results are bit-identical whether the
//! `parallel` feature is on, off, or disabled at runtime.

use std::sync::atomic::{AtomicBool, Ordering};

const CHUNK: usize = 2048;

static ENABLED: AtomicBool = AtomicBool::new(true);

/// Enable or disable the parallel code paths at runtime (no-op without the
/// `parallel` feature).
pub fn set_enabled(on: bool) {
    ENABLED.store(on, Ordering::Relaxed);
}

pub fn enabled() -> bool {
    cfg!(feature = "parallel") && ENABLED.load(Ordering::Relaxed)
}

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map_collect<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if enabled() && n >= CHUNK {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Apply `f(i, &mut out[i])` to every element.
pub fn for_each_mut<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if enabled() && out.len() >= CHUNK {
        use rayon::prelude::*;
        out.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x));
        return;
    }
    out.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
}

/// Deterministic `sum_i f(i)`.
pub fn sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let partial = |c: usize| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n);
        (lo..hi).map(&f).sum::<f64>()
    };
    #[cfg(feature = "parallel")]
    if enabled() && chunks > 1 {
        use rayon::prelude::*;
        let parts: Vec<f64> = (0..chunks).into_par_iter().map(partial).collect();
        return parts.iter().sum();
    }
    let parts: Vec<f64> = (0..chunks).map(partial).collect();
    parts.iter().sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    sum(a.len(), |i| a[i] * b[i])
}

/// Deterministic `max_i f(i)` (NaN-propagating is not needed; NaN compares false).
pub fn max<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if enabled() && n >= 4 * CHUNK {
        use rayon::prelude::*;
        return (0..n)
            .into_par_iter()
            .map(f)
            .reduce(|| f64::NEG_INFINITY, f64::max);
    }
    (0..n).map(f).fold(f64::NEG_INFINITY, f64::max)
}

/// Run independent jobs, at most `jobs` at a time, returning results in input order.
pub fn run_jobs<I, T, F>(items: &[I], jobs: usize, f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if enabled() && jobs > 1 && items.len() > 1 {
        use rayon::prelude::*;
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            return pool.install(|| items.par_iter().map(&f).collect());
        }
    }
    let _ = jobs;
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_is_independent_of_execution_mode() {
        let f = |i: usize| ((i as f64) * 0.37).sin() * 1e-3 + 1.0 / (i as f64 + 1.0);
        let n = 50_000;
        set_enabled(true);
        let a = sum(n, f);
        set_enabled(false);
        let b = sum(n, f);
        set_enabled(true);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn run_jobs_preserves_order() {
        let items: Vec<usize> = (0..17).collect();
        let out = run_jobs(&items, 4, |&i| i * i);
        assert_eq!(out, items.iter().map(|i| i * i).collect::<Vec<_>>());
    }

    #[test]
    fn max_of_empty_is_neg_infinity() {
        assert_eq!(max(0, |_| 1.0), f64::NEG_INFINITY);
    }
}
