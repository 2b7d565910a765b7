//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (on by default) [`Exec::Parallel`] runs on
//! the rayon thread pool. Without it, or with [`Exec::Sequential`], the
//! same code runs on the calling thread. Results are always returned in
//! input order, so outputs do not depend on the choice.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Parallel,
    Sequential,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

pub fn map<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => items.par_iter().map(f).collect(),
        _ => items.iter().map(f).collect(),
    }
}

/// Indices `0..n` mapped in order.
pub fn map_range<R, F>(exec: Exec, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_results_either_way() {
        let items: Vec<u64> = (0..1000).collect();
        let sq = |x: &u64| x * x;
        assert_eq!(
            map(Exec::Parallel, &items, sq),
            map(Exec::Sequential, &items, sq)
        );
        assert_eq!(
            map_range(Exec::Parallel, 50, |i| i + 1),
            map_range(Exec::Sequential, 50, |i| i + 1)
        );
    }
}
