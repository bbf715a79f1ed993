//! Batch execution helpers.
//!
//! With the `parallel` feature (on by default) these fan out over rayon's global pool;
//! without it they run as plain iterators. Results keep input order either way, so
//! callers see identical output under both builds.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, preserving order.
#[cfg(feature = "parallel")]
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    if items.len() < MIN_PARALLEL_LEN {
        return map_sequential(items, f);
    }
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Sequential twin of [`map`], always available so benchmarks can compare both.
pub fn map_sequential<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Sums `f` over `items`. Floating-point sums are reduced in fixed-size chunks so the
/// result does not depend on how the work was split.
#[cfg(feature = "parallel")]
pub fn sum_f64<T, F>(items: &[T], f: F) -> f64
where
    T: Sync,
    F: Fn(&T) -> f64 + Sync + Send,
{
    if items.len() < MIN_PARALLEL_LEN {
        return sum_f64_sequential(items, f);
    }
    let partials: Vec<f64> = items.par_chunks(CHUNK).map(|c| c.iter().map(&f).sum::<f64>()).collect();
    partials.into_iter().sum::<f64>() + 0.0
}

#[cfg(not(feature = "parallel"))]
pub fn sum_f64<T, F>(items: &[T], f: F) -> f64
where
    F: Fn(&T) -> f64,
{
    sum_f64_sequential(items, f)
}

pub fn sum_f64_sequential<T, F>(items: &[T], f: F) -> f64
where
    F: Fn(&T) -> f64,
{
    // `+ 0.0` turns the empty sum's -0.0 into 0.0
    items.chunks(CHUNK).map(|c| c.iter().map(&f).sum::<f64>()).sum::<f64>() + 0.0
}

const CHUNK: usize = 1024;

/// Below this many items the pool's dispatch cost outweighs the work.
#[cfg(feature = "parallel")]
const MIN_PARALLEL_LEN: usize = 512;

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
