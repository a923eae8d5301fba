//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the helpers fan out over rayon's
//! pool once the work is large enough. [`set_serial`] forces the sequential
//! path at runtime; without the feature everything runs sequentially. Each
//! output slot is computed by the same code in both modes, so results are
//! bit-identical regardless of scheduling.

use std::sync::atomic::{AtomicBool, Ordering};

use crate::linalg::CMat;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

static FORCE_SERIAL: AtomicBool = AtomicBool::new(false);

/// Work items below this count are always processed sequentially.
pub const PARALLEL_THRESHOLD: usize = 16;

pub fn set_serial(serial: bool) {
    FORCE_SERIAL.store(serial, Ordering::SeqCst);
}

pub fn is_serial() -> bool {
    !cfg!(feature = "parallel") || FORCE_SERIAL.load(Ordering::SeqCst)
}

/// Runs `f` with the sequential path forced, restoring the previous mode.
pub fn with_serial<R>(f: impl FnOnce() -> R) -> R {
    let prev = FORCE_SERIAL.swap(true, Ordering::SeqCst);
    let out = f();
    FORCE_SERIAL.store(prev, Ordering::SeqCst);
    out
}

pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if len >= PARALLEL_THRESHOLD && !is_serial() {
            return (0..len).into_par_iter().map(&f).collect();
        }
    }
    (0..len).map(f).collect()
}

pub fn try_map_indexed<T, E, F>(len: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if len >= PARALLEL_THRESHOLD && !is_serial() {
            return (0..len).into_par_iter().map(&f).collect();
        }
    }
    (0..len).map(f).collect()
}

/// Dense product `a * b`, splitting the columns of `b` across threads for
/// large operands.
pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.nrows(), "matmul dimension mismatch");
    let cols = b.ncols();
    if cols < 64 || a.nrows() < 64 {
        return a * b;
    }
    let columns = map_indexed(cols, |j| a * b.column(j));
    CMat::from_fn(a.nrows(), cols, |i, j| columns[j][i])
}
