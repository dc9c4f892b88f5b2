//! Data-parallel helpers. With the `parallel` feature the work is spread
//! over the rayon pool; without it, or with [`Execution::Sequential`], it
//! runs on the calling thread. Results always come back in index order.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

/// `(0..n).map(f).collect()`, in parallel when enabled.
pub fn map_indices<R, F>(n: usize, execution: Execution, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if execution == Execution::Parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = execution;
    (0..n).map(f).collect()
}

/// `items.iter().map(f).collect()`, in parallel when enabled.
pub fn map_slice<T, R, F>(items: &[T], execution: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    map_indices(items.len(), execution, |i| f(&items[i]))
}
