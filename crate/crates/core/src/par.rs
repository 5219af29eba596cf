//! Execution strategy for grid-shaped work.

/// How independent per-sample work is scheduled. Results are always
/// returned in input order, so reductions over them are deterministic.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled; otherwise runs
    /// sequentially.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// `items.iter().map(f)` collected in order, possibly in parallel.
pub fn map_ordered<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Like [`map_ordered`] for fallible work; the first error in input order
/// wins.
pub fn try_map_ordered<T, R, E, F>(exec: Execution, items: &[T], f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(&T) -> Result<R, E> + Sync + Send,
{
    map_ordered(exec, items, f).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_preserved() {
        let v: Vec<u64> = (0..1000).collect();
        let a = map_ordered(Execution::Sequential, &v, |x| x * x);
        let b = map_ordered(Execution::Parallel, &v, |x| x * x);
        assert_eq!(a, b);
    }

    #[test]
    fn first_error_wins() {
        let v: Vec<i32> = (0..100).collect();
        let r: Result<Vec<i32>, i32> = try_map_ordered(Execution::Parallel, &v, |&x| {
            if x % 30 == 7 {
                Err(x)
            } else {
                Ok(x)
            }
        });
        assert_eq!(r, Err(7));
    }
}
