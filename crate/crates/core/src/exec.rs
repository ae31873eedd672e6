//! Scheduling of independent per-bifunction work within one outer iteration.

use alloc::vec::Vec;

/// Maps a pure job over `0..n`, returning results in index order.
///
/// Implementations may run jobs concurrently; callers rely only on the
/// ordered output, so results do not depend on the schedule.
pub trait Executor {
    fn map<T, F>(&self, n: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync;
}

/// Runs every job on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, n: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        (0..n).map(job).collect()
    }
}
