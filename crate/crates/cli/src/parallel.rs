//! Order-preserving parallel map on a pool sized by `FREEZE_LAB_THREADS`.

use rayon::prelude::*;

use crate::config::ConfigError;

pub const THREADS_VAR: &str = "FREEZE_LAB_THREADS";

/// Worker count from `FREEZE_LAB_THREADS`; `None` lets rayon decide.
pub fn threads_from_env() -> Result<Option<usize>, ConfigError> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(ConfigError::Malformed { key: THREADS_VAR.into(), value: v }),
        },
    }
}

pub struct Workers {
    pool: rayon::ThreadPool,
}

impl Workers {
    pub fn new(threads: Option<usize>) -> Self {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            b = b.num_threads(n);
        }
        Self { pool: b.build().expect("thread pool") }
    }

    pub fn from_env() -> Result<Self, ConfigError> {
        Ok(Self::new(threads_from_env()?))
    }

    /// Results come back in input order whatever the completion order.
    pub fn map<T: Sync, R: Send>(&self, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
        self.pool.install(|| items.par_iter().map(f).collect())
    }
}
