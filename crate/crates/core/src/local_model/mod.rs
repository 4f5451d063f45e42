//! Localized weighted designs and quasi-maximum-likelihood fits.
//!
//! For a reference point `x` and scale `k` the local information matrix is
//! `B_k = sum_i psi_i psi_i^T w_{k,i} / sigma_i^2` with `psi_i = psi(X_i - x)`,
//! and the fit solves `B_k theta = sum_i psi_i Y_i w_{k,i} / sigma_i^2`.
//! Scale indices are 1-based throughout the public API.

mod basis;
mod fit;
mod ladder;
mod noise;
mod points;
mod problem;

pub use basis::{Basis, BasisKind, BasisSpec};
pub use fit::{build_b, pseudo_true_parameter, qmle, LocalDesign, LocalFit};
pub use ladder::{build_weights, Kernel, LadderSpec, ScaleLadder, DEFAULT_GROWTH};
pub use noise::{observed_delta, NoiseModel};
pub use points::Points;
pub use problem::LocalProblem;
