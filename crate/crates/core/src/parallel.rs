use alloc::vec::Vec;

/// Schedules independent jobs `0..jobs` and returns their results in job order.
///
/// Implementations may run jobs concurrently, but the returned vector must be
/// ordered by job index so that aggregation does not depend on scheduling.
pub trait Runner: Sync {
    fn run<T: Send, F: Fn(usize) -> T + Sync>(&self, jobs: usize, f: F) -> Vec<T>;
}

/// Runs every job on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Runner for Sequential {
    fn run<T: Send, F: Fn(usize) -> T + Sync>(&self, jobs: usize, f: F) -> Vec<T> {
        (0..jobs).map(f).collect()
    }
}
