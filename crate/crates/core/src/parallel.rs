//! Order-preserving parallel map over index ranges.
//!
//! Work items are independent and write to their own slot, so results do not
//! depend on the number of threads.

use std::sync::atomic::{AtomicUsize, Ordering};

static THREADS: AtomicUsize = AtomicUsize::new(1);

/// Set the worker count used by [`map`]; zero means one.
pub fn set_threads(k: usize) {
    THREADS.store(k.max(1), Ordering::Relaxed);
}

pub fn threads() -> usize {
    THREADS.load(Ordering::Relaxed)
}

/// `(0..n).map(f).collect()`, split across the configured workers.
pub fn map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let k = threads().min(n.max(1));
    if k <= 1 {
        return (0..n).map(f).collect();
    }
    let chunk = n.div_ceil(k);
    let f = &f;
    let mut out: Vec<T> = Vec::with_capacity(n);
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..k)
            .map(|t| {
                let lo = (t * chunk).min(n);
                let hi = ((t + 1) * chunk).min(n);
                scope.spawn(move || (lo..hi).map(f).collect::<Vec<T>>())
            })
            .collect();
        for h in handles {
            out.extend(h.join().expect("worker panicked"));
        }
    });
    out
}
