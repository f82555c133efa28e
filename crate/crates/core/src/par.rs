//! Data-parallel helpers. With the `parallel` feature these run on the
//! rayon pool; without it they are plain sequential loops.

/// Execution mode for top-level batch work.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Execution {
    /// Runs `op` so that every helper in this module called inside it
    /// follows the chosen mode.
    #[cfg(feature = "parallel")]
    pub fn install<R: Send, F: FnOnce() -> R + Send>(self, op: F) -> R {
        match self {
            Execution::Parallel => op(),
            Execution::Sequential => rayon::ThreadPoolBuilder::new()
                .num_threads(1)
                .build()
                .expect("single-thread pool")
                .install(op),
        }
    }

    #[cfg(not(feature = "parallel"))]
    pub fn install<R: Send, F: FnOnce() -> R + Send>(self, op: F) -> R {
        op()
    }
}

#[cfg(feature = "parallel")]
pub fn map<T: Sync, U: Send, F: Fn(&T) -> U + Sync + Send>(items: &[T], f: F) -> Vec<U> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, U, F: Fn(&T) -> U>(items: &[T], f: F) -> Vec<U> {
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_range<U: Send, F: Fn(usize) -> U + Sync + Send>(n: usize, f: F) -> Vec<U> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<U, F: Fn(usize) -> U>(n: usize, f: F) -> Vec<U> {
    (0..n).map(f).collect()
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let xs: Vec<u64> = (0..1000).collect();
        let seq = Execution::Sequential.install(|| map(&xs, |x| x * x));
        let par = Execution::Parallel.install(|| map(&xs, |x| x * x));
        assert_eq!(seq, par);
        assert_eq!(map_range(5, |i| i + 1), vec![1, 2, 3, 4, 5]);
    }
}
