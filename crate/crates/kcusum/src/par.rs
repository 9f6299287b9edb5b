//! Data-parallel fan-out with a sequential fallback.
//!
//! Simulation replicates and oracle chunks are independent work items whose
//! outputs are assembled in index order, so the parallel and sequential paths
//! produce identical results. With the `parallel` feature (default) work runs
//! on the current rayon pool; without it, a plain sequential loop.

#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    (0..n).map(f).collect()
}
