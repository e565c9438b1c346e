//! Deterministic map/reduce helpers.
//!
//! Every helper returns the same value whatever the worker count. Float sums
//! use fixed chunk boundaries and a fixed pairwise tree, so they are also
//! bit-identical between the rayon and the sequential builds.

use std::ops::Range;

/// Chunk length used by the float reductions. Fixed so results never depend
/// on scheduling.
pub const SUM_CHUNK: usize = 1024;

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

/// Runs `f` on a pool with `workers` threads (0 means the global default).
/// In the sequential build this simply calls `f`.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        if workers == 0 {
            return f();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        f()
    }
}

pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
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

pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Maximum of `f(i)` over `0..n`.
pub fn max_range<T, F>(n: usize, f: F) -> Option<T>
where
    T: Ord + Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).max()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).max()
    }
}

/// Smallest `i < n` with `pred(i)`.
pub fn find_first<F>(n: usize, pred: F) -> Option<usize>
where
    F: Fn(usize) -> bool + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().find_first(|&i| pred(i))
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).find(|&i| pred(i))
    }
}

/// `true` iff `pred(i)` holds for every `i < n`.
pub fn all_range<F>(n: usize, pred: F) -> bool
where
    F: Fn(usize) -> bool + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().all(pred)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).all(pred)
    }
}

/// Pairwise sum of a slice in a fixed tree order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// `Σ_{i<n} f(i)` with fixed chunking and pairwise combination.
pub fn sum_range<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(SUM_CHUNK);
    let partial = map_range(chunks, |c| {
        let r = chunk_bounds(c, n);
        let v: Vec<f64> = r.map(&f).collect();
        pairwise_sum(&v)
    });
    pairwise_sum(&partial)
}

/// Several sums at once: `f(i)` returns a fixed-length vector of addends.
pub fn sum_range_vec<F>(n: usize, width: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> Vec<f64> + Sync + Send,
{
    let chunks = n.div_ceil(SUM_CHUNK);
    let partial: Vec<Vec<f64>> = map_range(chunks, |c| {
        let rows: Vec<Vec<f64>> = chunk_bounds(c, n).map(&f).collect();
        (0..width)
            .map(|k| {
                let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
                pairwise_sum(&col)
            })
            .collect()
    });
    (0..width)
        .map(|k| {
            let col: Vec<f64> = partial.iter().map(|r| r[k]).collect();
            pairwise_sum(&col)
        })
        .collect()
}

fn chunk_bounds(c: usize, n: usize) -> Range<usize> {
    let lo = c * SUM_CHUNK;
    lo..(lo + SUM_CHUNK).min(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_keeps_order() {
        let v = map_range(10_000, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }

    #[test]
    fn find_first_is_smallest() {
        assert_eq!(find_first(100_000, |i| i % 977 == 976), Some(976));
        assert_eq!(find_first(10, |_| false), None);
    }

    #[test]
    fn sums_match_across_pools() {
        let f = |i: usize| ((i as f64) * 0.37).sin();
        let a = with_workers(1, || sum_range(50_000, f));
        let b = with_workers(8, || sum_range(50_000, f));
        assert_eq!(a.to_bits(), b.to_bits());
        let c = with_workers(3, || sum_range_vec(5000, 2, |i| vec![f(i), 1.0]));
        assert_eq!(c[1], 5000.0);
    }

    #[test]
    fn max_and_all() {
        assert_eq!(max_range(100, |i| (i * 37) % 101), Some(100));
        assert!(all_range(1000, |i| i < 1000));
        assert!(!all_range(1000, |i| i != 500));
    }
}
