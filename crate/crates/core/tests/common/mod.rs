use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use evinlier_core::Runner;

/// Work-stealing runner over scoped threads, for exercising schedule independence.
pub struct Threads(pub usize);

impl Runner for Threads {
    fn run<T: Send, F: Fn(usize) -> T + Sync>(&self, jobs: usize, f: F) -> Vec<T> {
        let next = AtomicUsize::new(0);
        let out: Mutex<Vec<Option<T>>> = Mutex::new((0..jobs).map(|_| None).collect());
        std::thread::scope(|s| {
            for _ in 0..self.0.max(1) {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= jobs {
                        break;
                    }
                    let v = f(i);
                    out.lock().unwrap()[i] = Some(v);
                });
            }
        });
        out.into_inner().unwrap().into_iter().map(|v| v.unwrap()).collect()
    }
}
