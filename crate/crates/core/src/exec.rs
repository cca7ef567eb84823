//! Execution policy for the data-parallel loops (raster cells, grid pairs,
//! segment pairs, probe samples).
//!
//! Every parallel loop in the crate goes through [`map_indexed`] or
//! [`min_by_key_indexed`], so results are assembled in index order and do not
//! depend on the number of worker threads. Without the `parallel` feature the
//! `Parallel` policy silently runs sequentially.

/// How a batch of independent jobs is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// `true` when this build can actually run jobs on several threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Evaluates `f(i)` for `i in 0..n` and returns the results in index order.
pub fn map_indexed<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Smallest `f(i)` over `i in 0..n` (ties broken by the lower index), ignoring `None`.
pub fn min_by_key_indexed<F>(exec: Exec, n: usize, f: F) -> Option<(usize, f64)>
where
    F: Fn(usize) -> Option<f64> + Sync + Send,
{
    let pick = |a: Option<(usize, f64)>, b: Option<(usize, f64)>| match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => {
            if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) {
                Some(b)
            } else {
                Some(a)
            }
        }
    };
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n)
            .into_par_iter()
            .map(|i| f(i).map(|v| (i, v)))
            .reduce(|| None, pick);
    }
    let _ = exec;
    (0..n).map(|i| f(i).map(|v| (i, v))).fold(None, pick)
}

/// Caps the global worker pool. Returns `false` when the pool was already
/// initialised (or the build is sequential).
pub fn init_threads(threads: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        false
    }
}
