use nalgebra::{DMatrix, DVector};

use super::basis::Basis;
use super::ladder::{build_weights, ScaleLadder};
use super::points::Points;
use crate::error::{invalid, Error, Result};
use crate::linalg::{guarded_cholesky, symmetrize};

/// Weighted local design at one reference point and one scale.
#[derive(Debug, Clone)]
pub struct LocalDesign {
    pub x: Vec<f64>,
    /// Scale index (1-based).
    pub k: usize,
    pub weights: Vec<f64>,
    pub b: DMatrix<f64>,
    pub active_count: usize,
}

/// Quasi-maximum-likelihood fit `theta_k` with its information matrix `B_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFit {
    /// Scale index (1-based).
    pub k: usize,
    pub theta: DVector<f64>,
    pub b: DMatrix<f64>,
}

fn check_lengths(weights: &[f64], sigma: &[f64], points: &Points, x: &[f64], basis: &Basis) -> Result<()> {
    if weights.len() != points.len() || sigma.len() != points.len() {
        return Err(invalid("weights, noise levels and design points differ in length"));
    }
    if x.len() != points.dim() || basis.dim() != points.dim() {
        return Err(invalid("dimension mismatch between basis, design and reference point"));
    }
    if sigma.iter().any(|s| !(*s > 0.0)) {
        return Err(invalid("noise levels must be positive"));
    }
    Ok(())
}

/// Accumulates `sum_i psi_i psi_i^T w_i / sigma_i^2`.
pub fn build_b(basis: &Basis, weights: &[f64], sigma: &[f64], points: &Points, x: &[f64]) -> Result<DMatrix<f64>> {
    build_b_at_scale(basis, weights, sigma, points, x, 0)
}

fn build_b_at_scale(
    basis: &Basis,
    weights: &[f64],
    sigma: &[f64],
    points: &Points,
    x: &[f64],
    scale: usize,
) -> Result<DMatrix<f64>> {
    check_lengths(weights, sigma, points, x, basis)?;
    let p = basis.p();
    let active = weights.iter().filter(|w| **w > 0.0).count();
    if active < p {
        return Err(Error::SingularDesign {
            scale,
            reason: format!("{active} active points for {p} basis functions"),
        });
    }
    let mut b = DMatrix::zeros(p, p);
    let mut psi = vec![0.0; p];
    let mut offset = vec![0.0; points.dim()];
    for (i, t) in points.iter().enumerate() {
        let w = weights[i];
        if w <= 0.0 {
            continue;
        }
        for (o, (a, c)) in offset.iter_mut().zip(t.iter().zip(x)) {
            *o = a - c;
        }
        basis.evaluate_into(&offset, &mut psi);
        let c = w / (sigma[i] * sigma[i]);
        for r in 0..p {
            for s in r..p {
                b[(r, s)] += psi[r] * psi[s] * c;
            }
        }
    }
    for r in 0..p {
        for s in 0..r {
            b[(r, s)] = b[(s, r)];
        }
    }
    symmetrize(&mut b);
    guarded_cholesky(&b).map_err(|reason| Error::SingularDesign { scale, reason })?;
    Ok(b)
}

/// `sum_i psi_i v_i w_i / sigma_i^2`.
fn weighted_response(basis: &Basis, weights: &[f64], sigma: &[f64], points: &Points, x: &[f64], v: &[f64]) -> DVector<f64> {
    let p = basis.p();
    let mut rhs = DVector::zeros(p);
    let mut psi = vec![0.0; p];
    let mut offset = vec![0.0; points.dim()];
    for (i, t) in points.iter().enumerate() {
        let w = weights[i];
        if w <= 0.0 {
            continue;
        }
        for (o, (a, c)) in offset.iter_mut().zip(t.iter().zip(x)) {
            *o = a - c;
        }
        basis.evaluate_into(&offset, &mut psi);
        let c = v[i] * w / (sigma[i] * sigma[i]);
        for r in 0..p {
            rhs[r] += psi[r] * c;
        }
    }
    rhs
}

/// Solves `B theta = Psi W y` by Cholesky.
pub fn qmle(
    basis: &Basis,
    weights: &[f64],
    sigma: &[f64],
    points: &Points,
    x: &[f64],
    y: &[f64],
    scale: usize,
) -> Result<LocalFit> {
    if y.len() != points.len() {
        return Err(invalid("observation count does not match the design"));
    }
    let b = build_b_at_scale(basis, weights, sigma, points, x, scale)?;
    let rhs = weighted_response(basis, weights, sigma, points, x, y);
    let chol = guarded_cholesky(&b).map_err(|reason| Error::SingularDesign { scale, reason })?;
    Ok(LocalFit {
        k: scale,
        theta: chol.solve(&rhs),
        b,
    })
}

/// Pseudo-true parameter `B^{-1} Psi W f`: the QMLE applied to noiseless data.
pub fn pseudo_true_parameter(
    basis: &Basis,
    weights: &[f64],
    sigma: &[f64],
    points: &Points,
    x: &[f64],
    f_values: &[f64],
) -> Result<DVector<f64>> {
    Ok(qmle(basis, weights, sigma, points, x, f_values, 0)?.theta)
}

impl LocalDesign {
    pub fn build(
        basis: &Basis,
        ladder: &ScaleLadder,
        points: &Points,
        sigma: &[f64],
        x: &[f64],
        k: usize,
    ) -> Result<Self> {
        let weights = build_weights(ladder, points, x, k)?;
        let b = build_b_at_scale(basis, &weights, sigma, points, x, k)?;
        let active_count = weights.iter().filter(|w| **w > 0.0).count();
        Ok(Self {
            x: x.to_vec(),
            k,
            weights,
            b,
            active_count,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local_model::Kernel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(n: usize) -> Points {
        Points::from_1d(&(0..n).map(|i| i as f64 - (n as f64 - 1.0) / 2.0).collect::<Vec<_>>())
    }

    #[test]
    fn constant_basis_sums_weights() {
        let basis = Basis::polynomial(1, 0).unwrap();
        let pts = line(5);
        let b = build_b(&basis, &[1.0; 5], &[1.0; 5], &pts, &[0.0]).unwrap();
        assert_eq!(b[(0, 0)], 5.0);
    }

    #[test]
    fn linear_symmetric_design() {
        let basis = Basis::polynomial(1, 1).unwrap();
        let pts = Points::from_1d(&[-1.0, 0.0, 1.0]);
        let ladder = ScaleLadder::new(vec![2.0], Kernel::Boxcar).unwrap();
        let d = LocalDesign::build(&basis, &ladder, &pts, &[1.0; 3], &[0.0], 1).unwrap();
        assert_eq!(d.b, DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 2.0]));
        assert_eq!(d.active_count, 3);
    }

    #[test]
    fn brute_force_accumulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let basis = Basis::polynomial(1, 2).unwrap();
        let xs: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..7).map(|_| rng.random_range(0.1..1.0)).collect();
        let s: Vec<f64> = (0..7).map(|_| rng.random_range(0.5..2.0)).collect();
        let x0 = 0.1;
        let b = build_b(&basis, &w, &s, &Points::from_1d(&xs), &[x0]).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                let mut acc = 0.0;
                for i in 0..7 {
                    let u = xs[i] - x0;
                    let psi = [1.0, u, u * u / 2.0];
                    acc += psi[r] * psi[c] * w[i] / (s[i] * s[i]);
                }
                assert!((b[(r, c)] - acc).abs() <= 1e-13 * acc.abs().max(1.0));
            }
        }
    }

    #[test]
    fn too_few_active_points() {
        let basis = Basis::polynomial(1, 1).unwrap();
        let pts = Points::from_1d(&[0.0, 1.0]);
        let err = build_b(&basis, &[1.0, 0.0], &[1.0; 2], &pts, &[0.0]).unwrap_err();
        assert!(matches!(err, Error::SingularDesign { .. }));
    }

    #[test]
    fn duplicated_points_are_singular() {
        let basis = Basis::polynomial(1, 1).unwrap();
        let pts = Points::from_1d(&[0.3, 0.3, 0.3]);
        assert!(build_b(&basis, &[1.0; 3], &[1.0; 3], &pts, &[0.0]).is_err());
    }

    #[test]
    fn interpolates_linear_data() {
        let basis = Basis::polynomial(1, 1).unwrap();
        let pts = line(9);
        let y: Vec<f64> = pts.iter().map(|t| 2.0 + 3.0 * t[0]).collect();
        let fit = qmle(&basis, &[1.0; 9], &[1.0; 9], &pts, &[0.0], &y, 1).unwrap();
        assert!((fit.theta[0] - 2.0).abs() < 1e-12);
        assert!((fit.theta[1] - 3.0).abs() < 1e-12);
        let zero = qmle(&basis, &[1.0; 9], &[1.0; 9], &pts, &[0.0], &[0.0; 9], 1).unwrap();
        assert_eq!(zero.theta.amax(), 0.0);
    }

    #[test]
    fn matches_dense_inverse_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let basis = Basis::polynomial(1, 2).unwrap();
        let n = 12;
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
        let s: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let x0 = -0.05;
        let pts = Points::from_1d(&xs);
        let fit = qmle(&basis, &w, &s, &pts, &[x0], &y, 1).unwrap();

        // explicit normal equations through the dense inverse
        let mut b = DMatrix::<f64>::zeros(3, 3);
        let mut rhs = DVector::<f64>::zeros(3);
        for i in 0..n {
            let u = xs[i] - x0;
            let psi = DVector::from_vec(vec![1.0, u, u * u / 2.0]);
            b += &psi * psi.transpose() * (w[i] / (s[i] * s[i]));
            rhs += &psi * (y[i] * w[i] / (s[i] * s[i]));
        }
        let theta = b.try_inverse().unwrap() * rhs;
        for j in 0..3 {
            assert!((fit.theta[j] - theta[j]).abs() <= 1e-10 * theta[j].abs().max(1e-12));
        }
    }

    #[test]
    fn pseudo_true_cases() {
        let pts = Points::from_1d(&[-1.0, 0.0, 1.0]);
        let basis = Basis::polynomial(1, 0).unwrap();
        let f: Vec<f64> = pts.iter().map(|t| t[0] * t[0]).collect();
        let tb = pseudo_true_parameter(&basis, &[1.0; 3], &[1.0; 3], &pts, &[0.0], &f).unwrap();
        // weighted mean oracle
        let oracle = f.iter().sum::<f64>() / 3.0;
        assert!((tb[0] - oracle).abs() < 1e-15);
        assert!((tb[0] - 2.0 / 3.0).abs() < 1e-15);

        let zero = pseudo_true_parameter(&basis, &[1.0; 3], &[1.0; 3], &pts, &[0.0], &[0.0; 3]).unwrap();
        assert_eq!(zero[0], 0.0);
    }
}
