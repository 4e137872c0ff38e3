//! Execution helpers for the data-parallel kernels.
//!
//! With the `parallel` feature (default) the `dispatch_*` functions run on the
//! rayon thread pool; without it they fall back to plain sequential loops. The
//! `seq_*` variants are always sequential and stay compiled either way so
//! benchmarks and determinism tests can compare both paths in one binary.
//!
//! Every kernel routed through here writes each output slot from exactly one
//! index, so parallel and sequential execution produce bit-identical results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `0..n` to a vector, one output element per index.
#[cfg(feature = "parallel")]
pub(crate) fn dispatch_map<U: Send, F: Fn(usize) -> U + Sync + Send>(n: usize, f: F) -> Vec<U> {
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn dispatch_map<U, F: Fn(usize) -> U>(n: usize, f: F) -> Vec<U> {
    seq_map(n, f)
}

pub(crate) fn seq_map<U, F: Fn(usize) -> U>(n: usize, f: F) -> Vec<U> {
    (0..n).map(f).collect()
}

/// Runtime-selected twin of [`dispatch_map`]: `sequential = true` forces the
/// sequential path even when the parallel feature is enabled.
pub(crate) fn map_indexed<U: Send>(
    sequential: bool,
    n: usize,
    f: impl Fn(usize) -> U + Sync + Send,
) -> Vec<U> {
    if sequential {
        seq_map(n, f)
    } else {
        dispatch_map(n, f)
    }
}

/// Fill `out` chunk by chunk; chunk `i` covers `out[i*chunk..(i+1)*chunk]`.
#[cfg(feature = "parallel")]
pub(crate) fn dispatch_fill_chunks<U: Send, F: Fn(usize, &mut [U]) + Sync + Send>(
    out: &mut [U],
    chunk: usize,
    f: F,
) {
    out.par_chunks_mut(chunk).enumerate().for_each(|(i, slice)| f(i, slice));
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn dispatch_fill_chunks<U, F: Fn(usize, &mut [U])>(out: &mut [U], chunk: usize, f: F) {
    seq_fill_chunks(out, chunk, f);
}

pub(crate) fn seq_fill_chunks<U, F: Fn(usize, &mut [U])>(out: &mut [U], chunk: usize, f: F) {
    for (i, slice) in out.chunks_mut(chunk).enumerate() {
        f(i, slice);
    }
}
