use nalgebra::DMatrix;
use serde::Serialize;

use super::joint::joint_cholesky;
use crate::error::{invalid, Error, Result};
use crate::linalg::generalized_eigenvalues;
use crate::local_model::LocalProblem;

/// `min_k lambda_min(B_k) sigma_max(k)^2 / (n h_k^d)`, the largest constant
/// for which the smallest-eigenvalue condition holds on this ladder.
pub fn lambda0(problem: &LocalProblem, n: usize, d: usize) -> f64 {
    (1..=problem.scales())
        .map(|k| {
            let s = problem.sigma_max(k);
            problem.lambda_min(k) * s * s / (n as f64 * problem.bandwidth(k).powi(d as i32))
        })
        .fold(f64::INFINITY, f64::min)
}

/// Tightest `s` with `Sigma_{k,j}^{-1} <= s Sigma_{k,j,diag}^{-1}`, i.e. the
/// largest eigenvalue of `D^{1/2} Sigma_{k,j}^{-1} D^{1/2}` over the given
/// component covariances.
pub fn s_j_estimate(component_covs: &[DMatrix<f64>]) -> Result<f64> {
    let mut best: f64 = 0.0;
    for (i, c) in component_covs.iter().enumerate() {
        let k = c.nrows();
        // eigenvalues of D^{1/2} C^{-1} D^{1/2} are reciprocals of those of D^{-1/2} C D^{-1/2}
        let diag = DMatrix::from_diagonal(&c.diagonal());
        let chol = joint_cholesky(&diag, i + 1)?;
        let ev = generalized_eigenvalues(c, &chol);
        if !(ev[0] > 0.0) {
            return Err(Error::SingularJointCovariance { k });
        }
        best = best.max(1.0 / ev[0]);
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmbChoice {
    /// Ideal index `k*(j)`.
    pub k_star: usize,
    /// Implied budget `s_j C_j^2 (1+delta) / (1 - 1/u_0)`.
    pub budget: f64,
}

/// Balance rule `max{k : bias_sup_k <= C_j s_k}` (with `d(n) = 1`) and the
/// modeling-bias budget it implies.
pub fn smb_from_tradeoff(bias_sup: &[f64], sd: &[f64], c_j: f64, s_j: f64, u0: f64, delta: f64) -> Result<SmbChoice> {
    if bias_sup.is_empty() || bias_sup.len() != sd.len() {
        return Err(invalid("bias and deviation sequences must be nonempty and of equal length"));
    }
    if !(u0 > 1.0) {
        return Err(Error::InvalidU(u0));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::DeltaOutOfRange(delta));
    }
    let ok = |k: usize| bias_sup[k] <= c_j * sd[k];
    if !ok(0) {
        return Err(Error::NoFeasibleScale(format!(
            "bias {} exceeds C_j s_1 = {} at the first scale",
            bias_sup[0],
            c_j * sd[0]
        )));
    }
    let k_star = (0..bias_sup.len()).filter(|&k| ok(k)).max().expect("k = 1 qualifies") + 1;
    let budget = s_j * c_j * c_j * (1.0 + delta) / (1.0 - 1.0 / u0);
    Ok(SmbChoice { k_star, budget })
}

/// `sup_{l <= k} |e_j^T theta_bar_l - target|` for `k = 1..K`.
pub fn bias_sup_sequence(theta_bars: &[nalgebra::DVector<f64>], j: usize, target: f64) -> Vec<f64> {
    let mut run: f64 = 0.0;
    theta_bars
        .iter()
        .map(|t| {
            run = run.max((t[j - 1] - target).abs());
            run
        })
        .collect()
}

/// Standard deviations of `e_j^T theta_k` under the given noise levels.
pub fn component_sd(problem: &LocalProblem, sigma_active: &[f64], j: usize) -> Vec<f64> {
    (1..=problem.scales())
        .map(|k| {
            let b_inv = problem.b_inverse(k);
            let c = problem.cross_information(k, k, sigma_active);
            let v = &b_inv * c * &b_inv;
            v[(j - 1, j - 1)].max(0.0).sqrt()
        })
        .collect()
}
