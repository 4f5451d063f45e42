//! Index-parallel map used by every Monte-Carlo loop.
//!
//! With the `parallel` feature the work is spread over rayon's pool; without it
//! the same closure runs sequentially. Results always come back in index order,
//! so any reduction done by the caller is independent of scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Evaluates `f(i)` for `i in 0..len` and returns the results in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..len).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..len).map(f).collect()
}

/// Sequential fallback, always available (used by the benches for comparison).
pub fn map_indexed_seq<T, F>(len: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..len).map(f).collect()
}

/// Whether the crate was built with the rayon backend.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

/// Execution backend for the Monte-Carlo loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// rayon when compiled in, sequential otherwise.
    #[default]
    Parallel,
    Sequential,
}

impl Backend {
    pub fn map<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Backend::Parallel => map_indexed(len, f),
            Backend::Sequential => map_indexed_seq(len, f),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backends_agree_in_order() {
        let f = |i: usize| (i as f64).sqrt() * 3.0;
        assert_eq!(Backend::Parallel.map(1000, f), Backend::Sequential.map(1000, f));
    }
}
