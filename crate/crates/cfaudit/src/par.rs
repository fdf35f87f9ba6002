//! Data-parallel facade.
//!
//! Every fan-out in the crate (per-sample counterfactual generation,
//! cross-validation folds, per-row scoring) goes through these helpers so
//! the whole workload switches between rayon and plain iteration with the
//! `parallel` cargo feature. Results are collected in input order, so both
//! paths produce identical output.
//!
//! The `AUDIT_WORKERS` environment variable caps the rayon pool; it is read
//! once on first use. The `*_seq` variants are always sequential and exist
//! for benchmarking the parallel paths against a fixed baseline.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
fn ensure_pool() {
    use std::sync::Once;
    static INIT: Once = Once::new();
    INIT.call_once(|| {
        if let Ok(v) = std::env::var("AUDIT_WORKERS") {
            if let Ok(n) = v.trim().parse::<usize>() {
                if n >= 1 {
                    // Ignore failure: a global pool may already exist.
                    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
                }
            }
        }
    });
}

/// Map `f` over `items`, collecting results in input order.
#[cfg(feature = "parallel")]
pub fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    ensure_pool();
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Map `f` over an index range, collecting results in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<U, F>(len: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    ensure_pool();
    (0..len).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<U, F>(len: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..len).map(f).collect()
}

/// Worker threads the fan-outs currently use.
#[cfg(feature = "parallel")]
pub fn workers() -> usize {
    ensure_pool();
    rayon::current_num_threads()
}

#[cfg(not(feature = "parallel"))]
pub fn workers() -> usize {
    1
}

/// Sequential baseline for [`map_collect`]; used by the bench suite.
pub fn map_collect_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Sequential baseline for [`map_indexed`]; used by the bench suite.
pub fn map_indexed_seq<U, F>(len: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..len).map(f).collect()
}
