//! Parameter-grid driving.
//!
//! Spectra, crossings, and canonicalizations over `(λ, μ)` grids are
//! independent per point, so the sweep layer is a thin order-preserving
//! map.  With the default `parallel` feature it runs on the rayon pool;
//! without it everything degrades to plain iteration with the same
//! results.  Per-point computations are deterministic, so the two
//! strategies agree bitwise.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, preserving input order in the output.
///
/// Runs data-parallel when the `parallel` feature is enabled and
/// sequentially otherwise.
#[cfg(feature = "parallel")]
pub fn map_collect<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    items.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_collect<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U,
{
    items.into_iter().map(f).collect()
}

/// Always-sequential map, kept available as a baseline regardless of
/// features.
pub fn map_collect_seq<T, U, F>(items: Vec<T>, mut f: F) -> Vec<U>
where
    F: FnMut(T) -> U,
{
    items.into_iter().map(&mut f).collect()
}

/// Runs `f` with the parallelism width capped at `jobs` threads
/// (`0` keeps the default pool).  Without the `parallel` feature the
/// closure simply runs on the current thread.
#[cfg(feature = "parallel")]
pub fn run_with_jobs<R, F>(jobs: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    if jobs == 0 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("failed to build a scoped thread pool");
    pool.install(f)
}

#[cfg(not(feature = "parallel"))]
pub fn run_with_jobs<R, F>(jobs: usize, f: F) -> R
where
    F: FnOnce() -> R,
{
    if jobs > 1 {
        log::debug!("built without the parallel feature; --jobs {jobs} runs sequentially");
    }
    f()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::converged_spectrum;
    use crate::rabi::RabiParams;

    #[test]
    fn mapping_preserves_order() {
        let items: Vec<u64> = (0..1000).collect();
        let out = map_collect(items.clone(), |x| x * x + 1);
        let want: Vec<u64> = items.iter().map(|x| x * x + 1).collect();
        assert_eq!(out, want);
    }

    #[test]
    fn strategies_agree_bitwise_on_spectra() {
        let grid: Vec<(f64, f64)> = (1..=6)
            .flat_map(|i| [(0.1 * i as f64, 0.3), (0.1 * i as f64, 0.7)])
            .collect();
        let ground = |(l, m): (f64, f64)| -> Vec<f64> {
            let params = RabiParams::new(l, m, 0.0).unwrap();
            converged_spectrum(&params, 4, 1e-7).unwrap().eigenvalues
        };
        let par = map_collect(grid.clone(), ground);
        let seq = map_collect_seq(grid, ground);
        assert_eq!(par, seq);
    }

    #[test]
    fn job_scoping_returns_the_closure_value() {
        let v = run_with_jobs(2, || (0..100).sum::<u64>());
        assert_eq!(v, 4950);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn job_count_bounds_the_pool() {
        let n = run_with_jobs(2, rayon::current_num_threads);
        assert_eq!(n, 2);
        let m = run_with_jobs(1, rayon::current_num_threads);
        assert_eq!(m, 1);
    }
}
