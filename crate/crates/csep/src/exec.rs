use csep_core::Executor;
use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

/// Runs the per-bifunction jobs of an outer iteration on a fixed pool.
///
/// Results come back in index order, so a run is independent of the worker count.
pub struct Threaded {
    pool: Option<ThreadPool>,
}

impl Threaded {
    /// One worker runs everything on the calling thread.
    pub fn new(workers: usize) -> Self {
        let pool = (workers > 1).then(|| {
            ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .expect("thread pool")
        });
        Threaded { pool }
    }

    pub fn workers(&self) -> usize {
        self.pool.as_ref().map_or(1, ThreadPool::current_num_threads)
    }
}

impl Executor for Threaded {
    fn map<T, F>(&self, n: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        match &self.pool {
            Some(pool) if n > 1 => pool.install(|| (0..n).into_par_iter().map(&job).collect()),
            _ => (0..n).map(job).collect(),
        }
    }
}
