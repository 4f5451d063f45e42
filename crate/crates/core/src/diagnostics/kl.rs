use nalgebra::DMatrix;
use serde::Serialize;

use super::joint::joint_cholesky;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KlReport {
    pub kl: f64,
    pub lower: f64,
    pub upper: f64,
}

fn log_det(chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>) -> f64 {
    2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

/// Kullback-Leibler divergence of `N(theta_bar, Sigma_{k,0})` from
/// `N(theta, Sigma_k)` given `Delta(k)`:
/// `2 KL = Delta + log(det Sigma_k / det Sigma_{k,0}) + tr(Sigma_k^{-1} Sigma_{k,0}) - pk`,
/// with the interval implied by a variance-ratio bound `delta`.
pub fn kl_joint(sigma_k: &DMatrix<f64>, sigma_k0: &DMatrix<f64>, big_delta: f64, delta: f64) -> Result<KlReport> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::DeltaOutOfRange(delta));
    }
    if sigma_k.shape() != sigma_k0.shape() {
        return Err(invalid("covariance shapes differ"));
    }
    let dim = sigma_k.nrows();
    let a = joint_cholesky(sigma_k, dim)?;
    let b = joint_cholesky(sigma_k0, dim)?;
    let trace = a.solve(sigma_k0).trace();
    let two_kl = big_delta + log_det(&a) - log_det(&b) + trace - dim as f64;
    let (lower, upper) = kl_sandwich(dim, big_delta, delta);
    Ok(KlReport { kl: 0.5 * two_kl, lower, upper })
}

/// `[-(pk/2) log(1+delta) + Delta/2 - pk delta/2, -(pk/2) log(1-delta) + Delta/2 + pk delta/2]`.
pub fn kl_sandwich(pk: usize, big_delta: f64, delta: f64) -> (f64, f64) {
    let n = pk as f64;
    (
        -n / 2.0 * (1.0 + delta).ln() + big_delta / 2.0 - n * delta / 2.0,
        -n / 2.0 * (1.0 - delta).ln() + big_delta / 2.0 + n * delta / 2.0,
    )
}

/// Homogeneous errors `sigma_0 / sigma` constant:
/// `pk log(sigma/sigma_0) + Delta/2 + (pk/2)(sigma_0^2/sigma^2 - 1)`.
pub fn kl_homogeneous(pk: usize, sigma: f64, sigma0: f64, big_delta: f64) -> f64 {
    let n = pk as f64;
    n * (sigma / sigma0).ln() + big_delta / 2.0 + n / 2.0 * (sigma0 * sigma0 / (sigma * sigma) - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{joint_covariance, modeling_bias};
    use crate::local_model::{observed_delta, Basis, Kernel, LocalProblem, Points, ScaleLadder};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_laws() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let r = kl_joint(&m, &m, 0.0, 0.0).unwrap();
        assert!(r.kl.abs() < 1e-12);
        assert!(kl_homogeneous(4, 1.3, 1.3, 0.0).abs() < 1e-15);
        assert!(kl_joint(&m, &m, 0.0, 1.0).is_err());
    }

    #[test]
    fn homogeneous_formula_agrees() {
        let pts = Points::equidistant(100, 0.0, 1.0);
        let basis = Basis::polynomial(1, 1).unwrap();
        let ladder = ScaleLadder::geometric(0.1, 1.5, 4, Kernel::Epanechnikov).unwrap();
        let sigma = 0.7;
        let prob = LocalProblem::new(&basis, &ladder, &pts, &vec![sigma; 100], &[0.5]).unwrap();
        let sigma0 = sigma * 1.1f64.sqrt();
        let m = prob.active_indices().len();
        for k in 1..=4 {
            let a = joint_covariance(&prob, &vec![sigma; m], k).unwrap();
            let b = joint_covariance(&prob, &vec![sigma0; m], k).unwrap();
            let general = kl_joint(&a, &b, 0.0, 0.1).unwrap().kl;
            let pk = 2 * k;
            let hom = kl_homogeneous(pk, sigma, sigma0, 0.0);
            let want = pk as f64 * ((sigma / sigma0).ln() + ((sigma0 / sigma).powi(2) - 1.0) / 2.0);
            assert!((general - hom).abs() < 1e-10);
            assert!((hom - want).abs() < 1e-12);
        }
    }

    #[test]
    fn kl_within_sandwich_on_random_scenes() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..40 {
            let n = 80;
            let pts = Points::equidistant(n, 0.0, 1.0);
            let sigma: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
            let delta: f64 = rng.random_range(0.0..0.3);
            let basis = Basis::polynomial(1, rng.random_range(0..3)).unwrap();
            let ladder = ScaleLadder::geometric(0.15, 1.4, 3, Kernel::Epanechnikov).unwrap();
            let prob = LocalProblem::new(&basis, &ladder, &pts, &sigma, &[0.5]).unwrap();
            let s = prob.active_sigma().to_vec();
            let s0: Vec<f64> = s.iter().map(|v| v * (1.0 + rng.random_range(-delta..=delta)).sqrt()).collect();
            assert!(observed_delta(&s, &s0) <= delta + 1e-12);
            let f: Vec<f64> = (0..n).map(|i| (i as f64 / 9.0).sin()).collect();
            let bars = prob.pseudo_true(&f);
            let theta = vec![0.0; prob.p()];
            let k = prob.scales();
            let a = joint_covariance(&prob, &s, k).unwrap();
            let b = joint_covariance(&prob, &s0, k).unwrap();
            let d = modeling_bias(&bars[..k], &theta, &a).unwrap().delta;
            let r = kl_joint(&a, &b, d, delta).unwrap();
            assert!(r.kl >= -1e-12);
            assert!(r.lower <= r.kl + 1e-9 && r.kl <= r.upper + 1e-9, "{r:?}");
        }
    }
}
