//! Worker pool with deterministic, fixed-order chunk reduction.
//!
//! Every bulk operation splits its index space into chunks of [`CHUNK_SIZE`].
//! Chunks are computed by whichever worker is free, but the per-chunk results
//! are always combined in chunk order, so floating-point reductions are
//! bitwise identical for any worker count.

use std::ops::Range;

/// Rows or calls per work unit.
pub const CHUNK_SIZE: usize = 4096;

pub struct WorkerPool {
    workers: usize,
    pool: Option<rayon::ThreadPool>,
}

impl WorkerPool {
    /// Pool with `workers` threads; `0` picks the available parallelism.
    pub fn new(workers: usize) -> Self {
        let workers = if workers == 0 {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        } else {
            workers
        };
        let pool = if workers > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .thread_name(|i| format!("hepflow-worker-{i}"))
                    .build()
                    .expect("failed to spawn worker threads"),
            )
        } else {
            None
        };
        Self { workers, pool }
    }

    /// Single-threaded pool; everything runs on the caller's thread.
    pub fn serial() -> Self {
        Self::new(1)
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Evaluates `f` on every chunk of `0..len` and returns the results in chunk order.
    pub fn map_chunks<T, F>(&self, len: usize, chunk: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(Range<usize>) -> T + Sync + Send,
    {
        let chunk = chunk.max(1);
        let n_chunks = len.div_ceil(chunk);
        let range = |c: usize| c * chunk..((c + 1) * chunk).min(len);
        match &self.pool {
            None => (0..n_chunks).map(|c| f(range(c))).collect(),
            Some(pool) => pool.install(|| {
                use rayon::prelude::*;
                (0..n_chunks)
                    .into_par_iter()
                    .with_max_len(1)
                    .map(|c| f(range(c)))
                    .collect()
            }),
        }
    }

    /// Like [`map_chunks`](Self::map_chunks) for fallible chunk work; the
    /// first failing chunk (in chunk order) determines the error.
    pub fn try_map_chunks<T, E, F>(&self, len: usize, chunk: usize, f: F) -> Result<Vec<T>, E>
    where
        T: Send,
        E: Send,
        F: Fn(Range<usize>) -> Result<T, E> + Sync + Send,
    {
        self.map_chunks(len, chunk, f).into_iter().collect()
    }

    /// Fixed-order sum of per-chunk partial sums.
    pub fn sum_chunks<E, F>(&self, len: usize, f: F) -> Result<f64, E>
    where
        E: Send,
        F: Fn(Range<usize>) -> Result<f64, E> + Sync + Send,
    {
        Ok(self
            .try_map_chunks(len, CHUNK_SIZE, f)?
            .into_iter()
            .fold(0.0, |acc, x| acc + x))
    }
}

impl Default for WorkerPool {
    fn default() -> Self {
        Self::new(0)
    }
}

impl std::fmt::Debug for WorkerPool {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WorkerPool")
            .field("workers", &self.workers)
            .finish()
    }
}

/// Running count, mean and sum of squared deviations (Chan et al. merge).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: f64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.n;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(self, other: Moments) -> Moments {
        if self.n == 0.0 {
            return other;
        }
        if other.n == 0.0 {
            return self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + delta * other.n / n,
            m2: self.m2 + other.m2 + delta * delta * self.n * other.n / n,
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2.0 {
            0.0
        } else {
            self.m2 / (self.n - 1.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunks_cover_range_in_order() {
        for workers in [1, 3, 8] {
            let pool = WorkerPool::new(workers);
            let ranges = pool.map_chunks(10_001, 1000, |r| r);
            assert_eq!(ranges.len(), 11);
            assert_eq!(ranges[0], 0..1000);
            assert_eq!(ranges[10], 10_000..10_001);
        }
    }

    #[test]
    fn empty_range_has_no_chunks() {
        assert!(WorkerPool::new(4).map_chunks(0, 16, |r| r).is_empty());
    }

    #[test]
    fn sum_is_worker_count_invariant() {
        let f = |r: Range<usize>| -> Result<f64, ()> {
            Ok(r.map(|i| (i as f64 * 0.37).sin() * 1e-3).sum())
        };
        let reference = WorkerPool::new(1).sum_chunks(100_000, f).unwrap();
        for workers in [2, 8] {
            let s = WorkerPool::new(workers).sum_chunks(100_000, f).unwrap();
            assert_eq!(s.to_bits(), reference.to_bits());
        }
    }

    #[test]
    fn first_error_wins() {
        let pool = WorkerPool::new(4);
        let r: Result<Vec<()>, usize> = pool.try_map_chunks(100, 10, |r| {
            if r.start >= 30 {
                Err(r.start)
            } else {
                Ok(())
            }
        });
        assert_eq!(r, Err(30));
    }

    #[test]
    fn moments_merge_matches_direct() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sqrt()).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|&x| all.push(x));
        let mut a = Moments::default();
        let mut b = Moments::default();
        xs[..300].iter().for_each(|&x| a.push(x));
        xs[300..].iter().for_each(|&x| b.push(x));
        let m = a.merge(b);
        assert!((m.mean - all.mean).abs() < 1e-12);
        assert!((m.variance() - all.variance()).abs() < 1e-10);
    }
}
