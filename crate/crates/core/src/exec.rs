//! Thin dispatch layer between the rayon-backed and sequential builds.
//!
//! Every data-parallel loop in the crate goes through `map_range`, which maps
//! a function over `0..n` and collects the results in index order. The
//! parallel build distributes the work across the rayon pool; the fallback
//! build runs the same closure sequentially. Because results are collected in
//! index order and all reductions happen afterwards in a fixed order, both
//! builds produce bit-identical output.

/// Below this size the dispatch overhead outweighs the work; run inline.
const PARALLEL_THRESHOLD: usize = 64;

#[cfg(feature = "parallel")]
pub(crate) fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    use rayon::prelude::*;
    if n < PARALLEL_THRESHOLD {
        return (0..n).map(f).collect();
    }
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_index_order() {
        let v = map_range(1000, |i| i * i);
        assert!(v.iter().enumerate().all(|(i, &x)| x == i * i));
    }
}
