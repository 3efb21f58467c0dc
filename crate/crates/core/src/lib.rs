//! Sequential subspace alignment (SSA) for temporal domain adaptation of
//! embedding data.
//!
//! The pipeline aligns the labeled embeddings of an earlier time-step onto
//! the frame of a later one, so that a classifier trained on the past can be
//! applied to the present:
//!
//! * [`linalg`] fits PCA bases and solves the closed-form alignment `M* = C_s^T C_t`.
//! * [`alignment`] aligns one source step to one target step, unsupervised or
//!   per class with a handful of labeled target seeds.
//! * [`temporal`] reduces any number of steps to one joint space with a tree of
//!   overlapping pairwise joins.
//! * [`classify`], [`data`] and [`eval`] supply the classifiers, corpus I/O,
//!   synthetic drift presets and the per-step evaluation protocol.
//! * [`cli`] wires it together behind the `ssa` binary.

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b): (f64, f64) = ($a, $b);
        assert!((a - b).abs() <= $tol, "{} vs {} (tol {})", a, b, $tol);
    }};
}

pub mod alignment;
pub mod classify;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod rng;
pub mod temporal;

pub use error::{Result, SsaError};

/// Class label identifier.
pub type Label = String;
/// Unique per-sample identifier.
pub type SampleId = String;
