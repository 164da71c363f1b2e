//! Worker-count control and the row-partitioned execution primitive.
//!
//! Every kernel in the crate writes its output through [`for_each_row`]: the
//! output buffer is split into disjoint rows and each row is produced by one
//! worker. Because no output element depends on scheduling, results are
//! bit-identical for any worker count. With the `parallel` feature disabled
//! all rows run on the calling thread.

use std::num::NonZeroUsize;

/// Environment variable overriding the default worker count.
pub const WORKERS_ENV: &str = "BLURKIT_WORKERS";

/// Number of workers a kernel may fan out to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Parallelism {
    workers: NonZeroUsize,
}

impl Parallelism {
    /// `workers == 0` is treated as 1.
    pub fn new(workers: usize) -> Self {
        Self {
            workers: NonZeroUsize::new(workers).unwrap_or(NonZeroUsize::MIN),
        }
    }

    pub fn serial() -> Self {
        Self::new(1)
    }

    /// One worker per available hardware thread.
    pub fn available() -> Self {
        Self::new(available_cores())
    }

    /// Honors [`WORKERS_ENV`], falling back to [`Parallelism::available`].
    pub fn from_env() -> Self {
        std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
            .map(Self::new)
            .unwrap_or_else(Self::available)
    }

    pub fn workers(&self) -> usize {
        self.workers.get()
    }
}

impl Default for Parallelism {
    fn default() -> Self {
        Self::from_env()
    }
}

pub fn available_cores() -> usize {
    std::thread::available_parallelism()
        .map(NonZeroUsize::get)
        .unwrap_or(1)
}

/// Runs `f(row_index, row)` over every `row_len`-sized chunk of `out`.
///
/// `out.len()` must be a multiple of `row_len`.
pub fn for_each_row<T, F>(out: &mut [T], row_len: usize, par: Parallelism, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    debug_assert!(row_len > 0 && out.len().is_multiple_of(row_len));
    if par.workers() == 1 || out.len() <= row_len {
        out.chunks_mut(row_len)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
        return;
    }
    imp::for_each_row(out, row_len, par.workers(), f);
}

/// Maps `f` over `items` on up to `par` workers, keeping input order.
pub fn map_ordered<T, R, F>(items: &[T], par: Parallelism, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if par.workers() == 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    imp::map_ordered(items, par.workers(), f)
}

#[cfg(feature = "parallel")]
mod imp {
    use std::collections::HashMap;
    use std::sync::{Arc, Mutex};

    use once_cell::sync::Lazy;
    use rayon::prelude::*;
    use rayon::{ThreadPool, ThreadPoolBuilder};

    static POOLS: Lazy<Mutex<HashMap<usize, Arc<ThreadPool>>>> =
        Lazy::new(|| Mutex::new(HashMap::new()));

    fn pool(workers: usize) -> Arc<ThreadPool> {
        let mut pools = POOLS.lock().unwrap_or_else(|e| e.into_inner());
        pools
            .entry(workers)
            .or_insert_with(|| {
                Arc::new(
                    ThreadPoolBuilder::new()
                        .num_threads(workers)
                        .thread_name(move |i| format!("blurkit-{workers}-{i}"))
                        .build()
                        .expect("failed to build worker pool"),
                )
            })
            .clone()
    }

    pub(super) fn for_each_row<T, F>(out: &mut [T], row_len: usize, workers: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        let rows = out.len() / row_len;
        // A few rows per task keeps scheduling overhead low on wide grids.
        let rows_per_task = (rows / (workers * 4)).max(1);
        pool(workers).install(|| {
            out.par_chunks_mut(row_len * rows_per_task)
                .enumerate()
                .for_each(|(task, block)| {
                    let first = task * rows_per_task;
                    for (i, row) in block.chunks_mut(row_len).enumerate() {
                        f(first + i, row);
                    }
                });
        });
    }

    pub(super) fn map_ordered<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        pool(workers).install(|| items.par_iter().map(f).collect())
    }
}

#[cfg(not(feature = "parallel"))]
mod imp {
    pub(super) fn for_each_row<T, F>(out: &mut [T], row_len: usize, _workers: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        out.chunks_mut(row_len)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    }

    pub(super) fn map_ordered<T, R, F>(items: &[T], _workers: usize, f: F) -> Vec<R>
    where
        F: Fn(&T) -> R,
    {
        items.iter().map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_workers_is_one() {
        assert_eq!(Parallelism::new(0).workers(), 1);
    }

    #[test]
    fn rows_visited_once() {
        for workers in [1, 2, 3, 8] {
            let mut out = vec![0usize; 7 * 13];
            for_each_row(&mut out, 13, Parallelism::new(workers), |r, row| {
                for (c, v) in row.iter_mut().enumerate() {
                    *v += r * 13 + c;
                }
            });
            assert!(out.iter().enumerate().all(|(i, &v)| v == i));
        }
    }
}
