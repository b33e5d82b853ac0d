use gdyn_core::Executor;
use rayon::prelude::*;

use crate::error::{CliError, CliResult};

/// Environment variable capping the worker pool size.
pub const THREADS_VAR: &str = "GDYN_THREADS";

/// Index-ordered parallel map on a dedicated rayon pool.
pub struct RayonExecutor {
    pool: rayon::ThreadPool,
}

impl RayonExecutor {
    /// Pool of `threads` workers, or one per available core when `None`.
    pub fn new(threads: Option<usize>) -> CliResult<Self> {
        let available = std::thread::available_parallelism().map_or(1, |n| n.get());
        let threads = threads.unwrap_or(available).max(1);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::config(format!("cannot start worker pool: {e}")))?;
        Ok(RayonExecutor { pool })
    }

    /// Pool sized by the available cores, capped by `GDYN_THREADS` when set.
    pub fn from_env() -> CliResult<Self> {
        let cap = match std::env::var(THREADS_VAR) {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|&t| t > 0)
                    .ok_or_else(|| {
                        CliError::config(format!(
                            "{THREADS_VAR} must be a positive integer, got {v:?}"
                        ))
                    })?,
            ),
            Err(_) => None,
        };
        let available = std::thread::available_parallelism().map_or(1, |n| n.get());
        Self::new(Some(cap.map_or(available, |c| c.min(available))))
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for RayonExecutor {
    fn map<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool
            .install(|| (0..count).into_par_iter().map(f).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gdyn_core::Sequential;

    #[test]
    fn preserves_order() {
        let ex = RayonExecutor::new(Some(4)).unwrap();
        assert_eq!(ex.threads(), 4);
        let par = ex.map(1000, |i| i * i);
        let seq = Sequential.map(1000, |i| i * i);
        assert_eq!(par, seq);
    }
}
