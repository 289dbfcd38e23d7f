//! Thread pool sized by the TILTCOPULA_THREADS environment variable.

use std::sync::OnceLock;

pub const THREADS_ENV: &str = "TILTCOPULA_THREADS";

fn configured_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Shared pool; the thread count is read once.
pub fn pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| rayon::ThreadPoolBuilder::new().num_threads(configured_threads()).build().expect("thread pool"))
}

/// A pool with an explicit thread count, for determinism checks.
pub fn pool_with(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build().expect("thread pool")
}
