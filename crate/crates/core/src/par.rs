//! Data-parallel helpers with a sequential fallback.
//!
//! Every batch loop in the crate goes through these functions so that the
//! `parallel` feature (rayon) can be switched off at build time, and so that
//! benchmarks can compare both strategies in one binary. Results never depend
//! on the strategy: work items are independent and randomness is derived
//! from per-item seeds.

/// How a batch of independent work items is executed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Uses the rayon pool when the `parallel` feature is enabled, and runs
    /// sequentially otherwise.
    #[default]
    Parallel,
}

impl Execution {
    /// True when this strategy will actually fan out over threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Parallel only for batches of at least `threshold` items.
    pub fn above(self, len: usize, threshold: usize) -> Execution {
        if len >= threshold {
            self
        } else {
            Execution::Sequential
        }
    }
}

/// `items.iter().map(f).collect()`, possibly in parallel. Output order matches input order.
pub fn map_slice<T, U, F>(exec: Execution, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// `(0..n).map(f).collect()`, possibly in parallel. Output order matches index order.
pub fn map_range<U, F>(exec: Execution, n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Like [`map_slice`] but hands each worker a reusable scratch value built by `init`.
pub fn map_slice_with<T, S, U, I, F>(exec: Execution, items: &[T], init: I, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, &T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map_init(&init, |s, t| f(s, t)).collect();
    }
    let _ = exec;
    let mut scratch = init();
    items.iter().map(|t| f(&mut scratch, t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies_agree() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = map_slice(Execution::Sequential, &xs, |x| x * x);
        let b = map_slice(Execution::Parallel, &xs, |x| x * x);
        assert_eq!(a, b);
        let c = map_range(Execution::Parallel, 1000, |i| (i as u64) * (i as u64));
        assert_eq!(a, c);
        let d = map_slice_with(
            Execution::Parallel,
            &xs,
            || 0u64,
            |acc, x| {
                *acc += 1;
                x * x
            },
        );
        assert_eq!(a, d);
    }

    #[test]
    fn small_batches_stay_sequential() {
        assert_eq!(Execution::Parallel.above(3, 10), Execution::Sequential);
        assert_eq!(Execution::Parallel.above(30, 10), Execution::Parallel);
    }
}
