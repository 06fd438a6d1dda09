use std::sync::atomic::{AtomicUsize, Ordering};

/// Environment variable capping internal parallelism.
pub const THREADS_ENV: &str = "HETERO_THREADS";

static FORCED: AtomicUsize = AtomicUsize::new(0);

/// Forces a fixed thread budget for the rest of the process (`1` gives the
/// fully sequential, deterministic reduction order).
pub fn force_threads(n: usize) {
    FORCED.store(n.max(1), Ordering::SeqCst);
}

pub fn thread_budget() -> usize {
    let forced = FORCED.load(Ordering::SeqCst);
    if forced > 0 {
        return forced;
    }
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    match std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        Some(cap) if cap >= 1 => cap.min(available),
        _ => available,
    }
}

/// Evaluates `f(0..len)` in contiguous chunks over at most `thread_budget()`
/// threads. Each slot is written by exactly one call, so the result does not
/// depend on the schedule.
pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send + Default + Clone,
    F: Fn(usize) -> T + Sync,
{
    let threads = thread_budget().min(len.max(1));
    let mut out = vec![T::default(); len];
    if threads <= 1 {
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = f(i);
        }
        return out;
    }
    let chunk = len.div_ceil(threads);
    std::thread::scope(|scope| {
        for (c, part) in out.chunks_mut(chunk).enumerate() {
            let f = &f;
            scope.spawn(move || {
                for (j, slot) in part.iter_mut().enumerate() {
                    *slot = f(c * chunk + j);
                }
            });
        }
    });
    out
}
