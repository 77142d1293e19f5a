//! Index-ordered parallel map. Results are always assembled by index, so
//! output does not depend on worker count or scheduling.

/// Applies `f` to `0..len` and returns results in index order. `jobs` caps
/// the worker count (`None` or `Some(0)` uses the default pool; `Some(1)`
/// runs sequentially).
pub fn map_indexed<T, F>(len: usize, jobs: Option<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        match jobs {
            Some(1) => (0..len).map(f).collect(),
            Some(j) if j > 1 => match rayon::ThreadPoolBuilder::new().num_threads(j).build() {
                Ok(pool) => pool.install(|| (0..len).into_par_iter().map(&f).collect()),
                Err(_) => (0..len).map(f).collect(),
            },
            _ => (0..len).into_par_iter().map(f).collect(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        (0..len).map(f).collect()
    }
}
