//! Data-parallel map over independent work items.
//!
//! With the `parallel` feature the items run on the rayon global pool;
//! without it every execution mode falls back to a plain loop. Results are
//! always returned in index order.

/// Environment variable capping the worker pool size.
pub const THREADS_ENV: &str = "MOMO_SIM_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Parallel,
    Sequential,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

pub fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Sizes the global pool from `MOMO_SIM_THREADS` when set. Returns the
/// requested size, or `None` when the variable is absent or the pool was
/// already built.
pub fn init_thread_pool_from_env() -> Result<Option<usize>, String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))?;
    #[cfg(feature = "parallel")]
    {
        Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .ok()
            .map(|_| n))
    }
    #[cfg(not(feature = "parallel"))]
    {
        Ok(Some(n))
    }
}
