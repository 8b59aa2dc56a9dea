//! Data-parallel execution facade.
//!
//! Ensemble work (replicas, sweeps, Monte Carlo batches) is expressed as a
//! map over an index range.  With the `parallel` feature (default) the map
//! runs on the rayon pool; without it the same code runs sequentially.
//! Results come back in index order, so reductions downstream are
//! deterministic regardless of scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `0..count`, collecting results in index order.
pub fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}

/// Fallible variant of [`map_indexed`]; the first error wins.
pub fn try_map_indexed<T, E, F>(count: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}

/// Sequential map, always available.  The criterion bench compares this
/// against [`map_indexed`] on identical workloads.
pub fn map_indexed_seq<T, F>(count: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..count).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_index_order() {
        let v = map_indexed(100, |i| i * i);
        let w = map_indexed_seq(100, |i| i * i);
        assert_eq!(v, w);
    }

    #[test]
    fn errors_propagate() {
        let r: Result<Vec<usize>, String> =
            try_map_indexed(10, |i| if i == 7 { Err("boom".into()) } else { Ok(i) });
        assert!(r.is_err());
    }
}
