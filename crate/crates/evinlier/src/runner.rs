use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use evinlier_core::Runner;

/// Runs jobs on a fixed number of scoped worker threads.
///
/// Workers pull job indices from a shared counter and results are stored by
/// index, so the output order never depends on scheduling.
#[derive(Debug, Clone, Copy)]
pub struct ThreadRunner {
    workers: usize,
}

impl ThreadRunner {
    pub fn new(workers: usize) -> Self {
        Self { workers: workers.max(1) }
    }

    /// One worker per available core.
    pub fn available() -> Self {
        Self::new(std::thread::available_parallelism().map_or(1, NonZeroUsize::get))
    }

    pub fn workers(&self) -> usize {
        self.workers
    }
}

impl Runner for ThreadRunner {
    fn run<T: Send, F: Fn(usize) -> T + Sync>(&self, jobs: usize, f: F) -> Vec<T> {
        let workers = self.workers.min(jobs);
        if workers <= 1 {
            return (0..jobs).map(f).collect();
        }
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..jobs).map(|_| None).collect());
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= jobs {
                        break;
                    }
                    let v = f(i);
                    slots.lock().expect("a worker panicked")[i] = Some(v);
                });
            }
        });
        slots
            .into_inner()
            .expect("a worker panicked")
            .into_iter()
            .map(|v| v.expect("every job ran"))
            .collect()
    }
}
