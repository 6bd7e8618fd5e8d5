//! Execution strategy for data-parallel loops.
//!
//! Work is always split into the same fixed-size blocks, each owning its own
//! random stream, so results do not depend on the strategy or thread count.
//! Without the `parallel` feature [`Exec::Parallel`] runs sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Units per generation block. Changing it changes every simulated dataset.
pub const BLOCK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// Maps `f` over `0..n_tasks`, preserving index order in the output.
    pub fn map<T, F>(self, n_tasks: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..n_tasks).into_par_iter().map(f).collect(),
            _ => (0..n_tasks).map(f).collect(),
        }
    }

    /// Runs `f(block_index, range)` over consecutive blocks of `n` units and
    /// concatenates the outputs in block order.
    pub fn blocks<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, std::ops::Range<usize>) -> Vec<T> + Sync + Send,
    {
        let n_blocks = n.div_ceil(BLOCK);
        self.map(n_blocks, |b| {
            let start = b * BLOCK;
            f(b, start..(start + BLOCK).min(n))
        })
        .into_iter()
        .flatten()
        .collect()
    }
}
