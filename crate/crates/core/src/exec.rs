//! Data-parallel driving of independent work items.
//!
//! The crate's heavy loops (trajectory ensembles, outcome enumeration,
//! sweep grids) are all embarrassingly parallel maps over an index range or
//! a slice. With the default `parallel` feature they run on the rayon pool;
//! without it they run sequentially with identical results. The explicit
//! `*_sequential` variants always exist so benchmarks can compare the two
//! execution modes inside one build.
//!
//! Every function preserves input order in its output, which is what makes
//! results independent of scheduling: callers fold the returned vector in
//! index order themselves.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, returning results in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sequential twin of [`map_indexed`], available regardless of features.
pub fn map_indexed_sequential<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Maps `f` over a slice, returning results in slice order.
pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Sequential twin of [`map_slice`].
pub fn map_slice_sequential<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_indexed_preserves_order() {
        let squares = map_indexed(100, |i| i * i);
        for (i, value) in squares.iter().enumerate() {
            assert_eq!(*value, i * i);
        }
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let work = |i: usize| (i as f64 * 0.1).sin().to_bits();
        assert_eq!(map_indexed(1000, work), map_indexed_sequential(1000, work));
        let items: Vec<f64> = (0..500).map(|i| i as f64).collect();
        let per_item = |x: &f64| (x * 1.5).cos().to_bits();
        assert_eq!(
            map_slice(&items, per_item),
            map_slice_sequential(&items, per_item)
        );
    }
}
