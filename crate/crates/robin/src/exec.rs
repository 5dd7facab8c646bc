use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;

use robin_core::Executor;

/// Runs independent tasks on up to `jobs` scoped threads. Results come back
/// in index order whatever the scheduling.
#[derive(Debug, Clone, Copy)]
pub struct Threads {
    jobs: NonZeroUsize,
}

impl Threads {
    pub fn new(jobs: NonZeroUsize) -> Self {
        Self { jobs }
    }

    pub fn jobs(&self) -> usize {
        self.jobs.get()
    }
}

impl Executor for Threads {
    fn map<T: Send, F: Fn(usize) -> T + Sync>(&self, n: usize, f: F) -> Vec<T> {
        let workers = self.jobs.get().min(n);
        if workers <= 1 {
            return (0..n).map(f).collect();
        }
        let next = AtomicUsize::new(0);
        let mut done: Vec<(usize, T)> = thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|_| {
                    s.spawn(|| {
                        let mut out = Vec::new();
                        loop {
                            let i = next.fetch_add(1, Ordering::Relaxed);
                            if i >= n {
                                break;
                            }
                            out.push((i, f(i)));
                        }
                        out
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().unwrap_or_else(|e| std::panic::resume_unwind(e)))
                .collect()
        });
        done.sort_by_key(|(i, _)| *i);
        done.into_iter().map(|(_, v)| v).collect()
    }
}
