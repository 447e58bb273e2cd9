//! Order-preserving map over independent work items, data-parallel when the
//! `parallel` feature is enabled and sequential otherwise.

/// How independent work items are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Global worker pool with its default thread count.
    #[default]
    Parallel,
    /// Dedicated pool with a fixed number of threads.
    Threads(usize),
}

impl Execution {
    /// True when this build can actually run work in parallel.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }

    pub fn from_threads(threads: Option<usize>) -> Self {
        match threads {
            Some(1) => Self::Sequential,
            Some(n) => Self::Threads(n),
            None => Self::Parallel,
        }
    }
}

/// `items.iter().map(f).collect()`, with results in input order regardless of
/// completion order.
pub fn map<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        match exec {
            Execution::Sequential => items.iter().map(f).collect(),
            Execution::Parallel => items.par_iter().map(f).collect(),
            Execution::Threads(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
                Err(_) => items.iter().map(f).collect(),
            },
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = exec;
        items.iter().map(f).collect()
    }
}
