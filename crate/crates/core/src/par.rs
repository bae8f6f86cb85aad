//! Order-preserving map helpers. With the `parallel` feature the work is spread
//! over the rayon pool; results are always returned in index order so any
//! reduction done by the caller is deterministic.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub(crate) fn map_indexed<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
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
