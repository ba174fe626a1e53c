//! Data-parallel helpers.
//!
//! With the `parallel` feature the `Parallel` mode maps through rayon;
//! without it every mode runs sequentially. Output order always matches
//! input order, so results are identical across modes.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecMode {
    Sequential,
    #[default]
    Parallel,
}

/// Whether the crate was built with rayon support.
pub const fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(feature = "parallel")]
pub fn map<T, R, F>(mode: ExecMode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match mode {
        ExecMode::Parallel => items.par_iter().map(f).collect(),
        ExecMode::Sequential => items.iter().map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, R, F>(_mode: ExecMode, items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Sizes the global pool; a no-op without the `parallel` feature.
#[cfg(feature = "parallel")]
pub fn init_threads(n: usize) -> crate::Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| crate::Error::InvalidParameter(format!("thread pool: {e}")))
}

#[cfg(not(feature = "parallel"))]
pub fn init_threads(_n: usize) -> crate::Result<()> {
    Ok(())
}

/// Parallel map over an index range.
pub fn map_range<R, F>(mode: ExecMode, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    let idx: Vec<usize> = (0..n).collect();
    map(mode, &idx, |&i| f(i))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_preserve_order() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = map(ExecMode::Sequential, &xs, |x| x * x);
        let b = map(ExecMode::Parallel, &xs, |x| x * x);
        assert_eq!(a, b);
        assert_eq!(a[999], 999 * 999);
    }
}
