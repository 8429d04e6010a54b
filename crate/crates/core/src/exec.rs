//! Execution policy for embarrassingly parallel loops (curve sweeps,
//! candidate enumeration, batches of gradient checks).
//!
//! With the `parallel` feature (on by default) [`Execution::Parallel`] maps
//! over items on the rayon pool. Without it, both policies run sequentially.
//! Results are always returned in input order, so outputs never depend on
//! scheduling.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
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

impl Execution {
    /// Applies `f` to every item, preserving order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).collect()
            }
            _ => items.iter().map(f).collect(),
        }
    }

    /// Applies `f` to `0..count` and folds the results with an associative,
    /// commutative `reduce`.
    pub fn map_reduce<R, F, G>(self, count: u64, identity: R, f: F, reduce: G) -> R
    where
        R: Send + Sync + Clone,
        F: Fn(u64) -> R + Sync + Send,
        G: Fn(R, R) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..count)
                    .into_par_iter()
                    .map(f)
                    .reduce(|| identity.clone(), &reduce)
            }
            _ => (0..count).map(f).fold(identity, reduce),
        }
    }
}
