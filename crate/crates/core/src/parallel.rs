//! Data-parallel helpers with a sequential fallback.
//!
//! Batch workloads (seed sweeps, comparison runs, oracle batches) map
//! independent items through a worker function. With the `parallel` feature
//! (default) the work is spread over the rayon pool; without it, or when the
//! caller asks for sequential execution, items run in order on the calling
//! thread. Output order always matches input order, so results never depend
//! on the schedule.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `items` through `f`, in parallel when both the feature and the flag
/// allow it.
#[cfg(feature = "parallel")]
pub fn map_batch<T, U, F>(items: Vec<T>, parallel: bool, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    if parallel {
        items.into_par_iter().map(f).collect()
    } else {
        items.into_iter().map(f).collect()
    }
}

/// Sequential build: the flag is accepted but ignored.
#[cfg(not(feature = "parallel"))]
pub fn map_batch<T, U, F>(items: Vec<T>, _parallel: bool, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    items.into_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_input_order() {
        let items: Vec<usize> = (0..100).collect();
        let parallel = map_batch(items.clone(), true, |x| x * 2);
        let sequential = map_batch(items, false, |x| x * 2);
        assert_eq!(parallel, sequential);
        assert_eq!(parallel[7], 14);
    }
}
