//! Trial execution: rayon when the `parallel` feature is on, a plain loop
//! otherwise. Results always come back in index order.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Execution {
    Sequential,
    /// Global rayon pool.
    #[default]
    Parallel,
    Threads(usize),
}

impl Execution {
    pub fn from_threads(threads: Option<usize>) -> Self {
        match threads {
            None => Execution::Parallel,
            Some(0 | 1) => Execution::Sequential,
            Some(n) => Execution::Threads(n),
        }
    }
}

/// `(0..n).map(f)` collected in order.
pub fn map_sequential<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    match exec {
        Execution::Sequential => map_sequential(n, f),
        Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
        Execution::Threads(threads) => match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
            Err(_) => map_sequential(n, f),
        },
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, _exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_sequential(n, f)
}
