//! Replicate fan-out.
//!
//! Replicates run on the current rayon pool; results come back in replicate
//! order and are reduced sequentially, so aggregates do not depend on the
//! number of workers.

use rayon::prelude::*;

/// Environment variable bounding the worker count.
pub const THREADS_ENV: &str = "TREECP_THREADS";

/// Replicates mapped per batch; bounds the memory held between reductions.
const BATCH: u64 = 512;

/// Worker count from `TREECP_THREADS`, else the machine's parallelism.
pub fn threads_from_env() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Maps replicates `0..n` in parallel and folds the results in order.
pub fn fold_replicates<T, A>(n: u64, init: A, map: impl Fn(u64) -> T + Sync, mut fold: impl FnMut(A, u64, T) -> A) -> A
where
    T: Send,
{
    let mut acc = init;
    let mut start = 0;
    while start < n {
        let end = (start + BATCH).min(n);
        let batch: Vec<T> = (start..end).into_par_iter().map(&map).collect();
        for (k, t) in (start..end).zip(batch) {
            acc = fold(acc, k, t);
        }
        start = end;
    }
    acc
}

/// Maps replicates `0..n` in parallel, preserving order.
pub fn map_replicates<T: Send>(n: u64, map: impl Fn(u64) -> T + Sync) -> Vec<T> {
    (0..n).into_par_iter().map(&map).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_is_ordered_for_any_pool() {
        let run = |threads| {
            with_threads(threads, || {
                fold_replicates(
                    2000,
                    Vec::new(),
                    |k| k * k,
                    |mut v, k, t| {
                        assert_eq!(t, k * k);
                        v.push(t);
                        v
                    },
                )
            })
        };
        assert_eq!(run(1), run(8));
    }
}
