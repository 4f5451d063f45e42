use crate::error::{invalid, Result};
use crate::linalg::generalized_eigenvalues;
use crate::local_model::LocalProblem;

/// Nonzero eigenvalues of `S = Sigma_0^{1/2} W_k Psi^T B_k^{-1} Psi W_k Sigma_0^{1/2}`,
/// ascending.
///
/// `S` shares its nonzero spectrum with the `p x p` matrix `L^{-1} C L^{-T}`,
/// `C = sum_i psi_i psi_i^T w_i^2 sigma_{0,i}^2 / sigma_i^4`, `B_k = L L^T`.
pub fn wilks_spectrum(problem: &LocalProblem, k: usize, sigma_true_active: &[f64]) -> Result<Vec<f64>> {
    if k == 0 || k > problem.scales() {
        return Err(invalid(format!("k = {k} outside 1..={}", problem.scales())));
    }
    if sigma_true_active.len() != problem.active_indices().len() {
        return Err(invalid("noise levels must cover the active points"));
    }
    let c = problem.cross_information(k, k, sigma_true_active);
    Ok(generalized_eigenvalues(&c, problem.b_cholesky(k)))
}

/// `tr(B_k^{-1} Psi W_k Psi^T)`, the trace of the weighted projector (equals `p`).
pub fn projector_trace(problem: &LocalProblem, k: usize) -> f64 {
    (problem.operator(k) * problem.psi()).trace()
}

/// `2 L(W_k, theta, theta') = (theta - theta')^T B_k (theta - theta')`.
pub fn two_log_likelihood_ratio(problem: &LocalProblem, k: usize, theta: &[f64], theta_prime: &[f64]) -> f64 {
    crate::selector::weighted_gap(problem.b(k), theta, theta_prime)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local_model::{Basis, Kernel, Points, ScaleLadder};
    use nalgebra::DMatrix;

    fn problem(kernel: Kernel, deg: usize) -> LocalProblem {
        let n = 150;
        let pts = Points::equidistant(n, 0.0, 1.0);
        let sigma: Vec<f64> = (0..n).map(|i| 0.6 + 0.4 * (i as f64 / 25.0).sin().abs()).collect();
        let basis = Basis::polynomial(1, deg).unwrap();
        let ladder = ScaleLadder::geometric(0.1, 1.5, 3, kernel).unwrap();
        LocalProblem::new(&basis, &ladder, &pts, &sigma, &[0.45]).unwrap()
    }

    /// The full `m x m` matrix `S` built literally, for comparison.
    fn dense_s(problem: &LocalProblem, k: usize, s0: &[f64]) -> DMatrix<f64> {
        let m = s0.len();
        let sig = problem.active_sigma();
        let w = problem.weights(k);
        let wd = DMatrix::from_fn(m, m, |i, j| if i == j { w[i] / (sig[i] * sig[i]) } else { 0.0 });
        let half = DMatrix::from_fn(m, m, |i, j| if i == j { s0[i] } else { 0.0 });
        let psi_t = problem.psi().transpose();
        &half * &wd * psi_t.transpose() * problem.b_inverse(k) * psi_t * &wd * &half
    }

    #[test]
    fn boxcar_gives_unit_spectrum() {
        for deg in 0..3 {
            let prob = problem(Kernel::Boxcar, deg);
            for k in 1..=3 {
                let ev = wilks_spectrum(&prob, k, prob.active_sigma()).unwrap();
                assert_eq!(ev.len(), deg + 1);
                assert!(ev.iter().all(|v| (v - 1.0).abs() < 1e-10), "{ev:?}");
                assert!((projector_trace(&prob, k) - (deg + 1) as f64).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn smooth_kernel_spectrum_below_one_and_matches_dense() {
        let prob = problem(Kernel::Epanechnikov, 1);
        let s = prob.active_sigma().to_vec();
        let ev = wilks_spectrum(&prob, 2, &s).unwrap();
        assert!(ev.iter().all(|v| *v <= 1.0 + 1e-12 && *v > 0.0));
        let mut dense = crate::linalg::sym_eigenvalues(&dense_s(&prob, 2, &s));
        dense.reverse();
        assert!(dense[2].abs() < 1e-10);
        assert!((dense[0] - ev[1]).abs() < 1e-10 && (dense[1] - ev[0]).abs() < 1e-10);
    }

    #[test]
    fn spectrum_is_linear_in_true_variance() {
        let prob = problem(Kernel::Epanechnikov, 2);
        let s = prob.active_sigma().to_vec();
        let inflated: Vec<f64> = s.iter().map(|v| v * 1.2f64.sqrt()).collect();
        let a = wilks_spectrum(&prob, 3, &s).unwrap();
        let b = wilks_spectrum(&prob, 3, &inflated).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((y - 1.2 * x).abs() < 1e-12);
        }
        assert!(b[2] <= 1.2 + 1e-12);
    }
}
