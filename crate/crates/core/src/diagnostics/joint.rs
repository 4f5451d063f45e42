use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{invalid, Error, Result};
use crate::linalg::{generalized_eigenvalues, symmetrize};
use crate::local_model::LocalProblem;

/// Covariance of the stacked estimates `(theta_1, ..., theta_k)` when the
/// active observations have standard deviations `sigma_active`.
///
/// Block `(l, m)` is `B_l^{-1} [sum_i psi_i psi_i^T w_{l,i} w_{m,i} s_i^2 / sigma_i^4] B_m^{-1}`.
/// With `s = sigma` this is the model-law matrix, with the true levels it is
/// the true-law matrix.
pub fn joint_covariance(problem: &LocalProblem, sigma_active: &[f64], k: usize) -> Result<DMatrix<f64>> {
    if k == 0 || k > problem.scales() {
        return Err(invalid(format!("k = {k} outside 1..={}", problem.scales())));
    }
    if sigma_active.len() != problem.active_indices().len() {
        return Err(invalid("noise levels must cover the active points"));
    }
    let p = problem.p();
    let inv: Vec<DMatrix<f64>> = (1..=k).map(|l| problem.b_inverse(l)).collect();
    let mut out = DMatrix::zeros(p * k, p * k);
    for l in 1..=k {
        for m in l..=k {
            let c = problem.cross_information(l, m, sigma_active);
            let block = &inv[l - 1] * c * &inv[m - 1];
            out.view_mut(((l - 1) * p, (m - 1) * p), (p, p)).copy_from(&block);
            if l != m {
                out.view_mut(((m - 1) * p, (l - 1) * p), (p, p)).copy_from(&block.transpose());
            }
        }
    }
    symmetrize(&mut out);
    Ok(out)
}

/// The `k x k` covariance of the `j`-th coordinates (1-based `j`).
pub fn component_covariance(sigma_k: &DMatrix<f64>, p: usize, j: usize) -> Result<DMatrix<f64>> {
    if j == 0 || j > p {
        return Err(Error::IndexOutOfRange { index: j, len: p });
    }
    let k = sigma_k.nrows() / p;
    Ok(DMatrix::from_fn(k, k, |a, b| sigma_k[(a * p + j - 1, b * p + j - 1)]))
}

pub(crate) fn joint_cholesky(m: &DMatrix<f64>, k: usize) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone()).ok_or(Error::SingularJointCovariance { k })
}

/// Eigenvalue range of `Sigma_k^{-1/2} Sigma_{k,0} Sigma_k^{-1/2}`; lies in
/// `[1 - delta, 1 + delta]` when the variance ratios do.
pub fn sandwich_range(sigma_k: &DMatrix<f64>, sigma_k0: &DMatrix<f64>) -> Result<(f64, f64)> {
    let k = sigma_k.nrows();
    let chol = joint_cholesky(sigma_k, k)?;
    let ev = generalized_eigenvalues(sigma_k0, &chol);
    Ok((ev[0], ev[ev.len() - 1]))
}

/// `det B_k^{-1} prod_{l=2..k} det(B_{l-1}^{-1} - B_l^{-1})`, the determinant
/// of the model-law joint covariance for nested boxcar windows.
pub fn boxcar_determinant_from(bs: &[DMatrix<f64>]) -> Result<f64> {
    Ok(boxcar_log_determinant_from(bs)?.exp())
}

/// Uses `B_{l-1}^{-1} - B_l^{-1} = B_{l-1}^{-1} (B_l - B_{l-1}) B_l^{-1}` so no
/// inverses are subtracted.
pub fn boxcar_log_determinant_from(bs: &[DMatrix<f64>]) -> Result<f64> {
    if bs.is_empty() {
        return Err(invalid("need at least one information matrix"));
    }
    let mut logs = Vec::with_capacity(bs.len());
    for (i, b) in bs.iter().enumerate() {
        let chol = Cholesky::new(b.clone()).ok_or_else(|| Error::SingularDesign {
            scale: i + 1,
            reason: "information matrix is not positive definite".into(),
        })?;
        logs.push(2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>());
    }
    let k = bs.len();
    let mut log_det = -logs[k - 1];
    for l in 1..k {
        let gain = &bs[l] - &bs[l - 1];
        log_det += log_det_spd(&gain, k)? - logs[l - 1] - logs[l];
    }
    Ok(log_det)
}

fn log_det_spd(m: &DMatrix<f64>, k: usize) -> Result<f64> {
    let chol = joint_cholesky(m, k)?;
    Ok(2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

/// Closed-form determinant for the first `k` scales of `problem`, which must
/// use nested boxcar windows.
pub fn boxcar_determinant(problem: &LocalProblem, k: usize) -> Result<f64> {
    if k == 0 || k > problem.scales() {
        return Err(invalid(format!("k = {k} outside 1..={}", problem.scales())));
    }
    if !problem.is_nested_boxcar() {
        return Err(Error::NotBoxcar("weights violate w_l * w_m = w_l".into()));
    }
    let bs: Vec<DMatrix<f64>> = (1..=k).map(|l| problem.b(l).clone()).collect();
    boxcar_determinant_from(&bs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local_model::{Basis, Kernel, Points, ScaleLadder};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Literal `D (J_k (x) Sigma) D^T` with the block-diagonal `D`.
    fn kronecker_oracle(problem: &LocalProblem, s: &[f64], k: usize) -> DMatrix<f64> {
        let p = problem.p();
        let m = s.len();
        let mut d = DMatrix::zeros(p * k, m * k);
        for l in 1..=k {
            d.view_mut(((l - 1) * p, (l - 1) * m), (p, m)).copy_from(problem.operator(l));
        }
        let sigma = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(m, s.iter().map(|v| v * v)));
        let jk = DMatrix::from_element(k, k, 1.0);
        let kron = jk.kronecker(&sigma);
        &d * kron * d.transpose()
    }

    fn scene(kernel: Kernel, p_deg: usize, seed: u64) -> (LocalProblem, Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 90;
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let pts = Points::from_1d(&xs);
        let sigma: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        let basis = Basis::polynomial(1, p_deg).unwrap();
        let ladder = ScaleLadder::geometric(0.15, 1.5, 4, kernel).unwrap();
        let prob = LocalProblem::new(&basis, &ladder, &pts, &sigma, &[0.5]).unwrap();
        let active = prob.active_sigma().to_vec();
        let delta: f64 = 0.25;
        let truth: Vec<f64> = active
            .iter()
            .map(|s| s * (1.0 + rng.random_range(-delta..delta)).sqrt())
            .collect();
        (prob, active, truth)
    }

    #[test]
    fn matches_kronecker_definition() {
        for (kernel, seed) in [(Kernel::Boxcar, 1), (Kernel::Epanechnikov, 2), (Kernel::TruncatedGaussian, 3)] {
            let (prob, s, s0) = scene(kernel, 1, seed);
            for k in 1..=prob.scales() {
                for sig in [&s, &s0] {
                    let a = joint_covariance(&prob, sig, k).unwrap();
                    let b = kronecker_oracle(&prob, sig, k);
                    assert!((&a - &b).amax() < 1e-12 * b.amax());
                }
            }
        }
    }

    #[test]
    fn boxcar_blocks_are_inverse_information() {
        let (prob, s, _) = scene(Kernel::Boxcar, 0, 4);
        let sig = joint_covariance(&prob, &s, 2).unwrap();
        let b1 = prob.b(1)[(0, 0)];
        let b2 = prob.b(2)[(0, 0)];
        let want = [[1.0 / b1, 1.0 / b2], [1.0 / b2, 1.0 / b2]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((sig[(i, j)] - want[i][j]).abs() < 1e-14);
            }
        }
        let one = joint_covariance(&prob, &s, 1).unwrap();
        assert!((&one - prob.b_inverse(1)).amax() < 1e-14);
    }

    #[test]
    fn sandwich_holds_on_random_scene() {
        for seed in 0..10 {
            let (prob, s, s0) = scene(Kernel::Epanechnikov, 1, 100 + seed);
            let delta = crate::local_model::observed_delta(&s, &s0);
            let k = prob.scales();
            let a = joint_covariance(&prob, &s, k).unwrap();
            let b = joint_covariance(&prob, &s0, k).unwrap();
            let (lo, hi) = sandwich_range(&a, &b).unwrap();
            assert!(lo >= 1.0 - delta - 1e-9 && hi <= 1.0 + delta + 1e-9, "{lo} {hi} {delta}");
            // eigenvalue oracle on the difference matrices
            let up = (1.0 + delta) * &a - &b;
            let down = &b - (1.0 - delta) * &a;
            assert!(crate::linalg::sym_eigenvalues(&up)[0] > -1e-10 * a.amax());
            assert!(crate::linalg::sym_eigenvalues(&down)[0] > -1e-10 * a.amax());
        }
    }

    #[test]
    fn determinant_examples() {
        let bs = [DMatrix::from_element(1, 1, 2.0), DMatrix::from_element(1, 1, 5.0)];
        assert!((boxcar_determinant_from(&bs).unwrap() - 0.06).abs() < 1e-15);
        let (prob, s, _) = scene(Kernel::Boxcar, 1, 7);
        for k in 2..=prob.scales() {
            let dense = joint_covariance(&prob, &s, k).unwrap().determinant();
            let closed = boxcar_determinant(&prob, k).unwrap();
            assert!((closed - dense).abs() <= 1e-8 * dense.abs());
        }
        let (smooth, _, _) = scene(Kernel::Epanechnikov, 1, 7);
        assert!(matches!(boxcar_determinant(&smooth, 2), Err(Error::NotBoxcar(_))));
    }

    #[test]
    fn component_selection() {
        let (prob, s, _) = scene(Kernel::Boxcar, 2, 9);
        let sig = joint_covariance(&prob, &s, 3).unwrap();
        let c = component_covariance(&sig, 3, 2).unwrap();
        assert_eq!(c.nrows(), 3);
        assert_eq!(c[(2, 1)], sig[(7, 4)]);
        assert!(component_covariance(&sig, 3, 4).is_err());
    }
}
