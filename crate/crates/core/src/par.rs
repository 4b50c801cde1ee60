//! Execution policy for the data-parallel kernels.
//!
//! With the `parallel` feature enabled, kernels above [`PAR_MIN_WORK`] fan out
//! over rayon. Without it, every `Parallel` request runs the sequential path,
//! so results never depend on the feature set: each output element is reduced
//! in a fixed order by exactly one task.

/// Work (roughly, number of scalar multiply-adds) below which a kernel stays
/// sequential even under [`Execution::Parallel`].
pub const PAR_MIN_WORK: usize = 1 << 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether a kernel of the given size should actually fan out.
    pub fn fan_out(self, work: usize) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel && work >= PAR_MIN_WORK
    }
}

/// `out[i] = f(i)` for `i in 0..len`.
pub(crate) fn fill_indexed<F>(exec: Execution, work: usize, out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.fan_out(work) {
        use rayon::prelude::*;
        out.par_iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
        return;
    }
    let _ = (exec, work);
    for (i, o) in out.iter_mut().enumerate() {
        *o = f(i);
    }
}

/// Maps `f` over `items`, preserving order.
pub(crate) fn map_ordered<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel && items.len() > 1 {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}
