//! Index-ordered parallel map abstraction.

use alloc::vec::Vec;

/// Maps `f` over `0..count`, returning results in index order.
///
/// Implementations may run calls concurrently but must preserve ordering so
/// that reductions over the result are schedule independent.
pub trait Executor: Sync {
    fn map<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs everything on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..count).map(f).collect()
    }
}
