//! Closed-form right-hand sides of the risk bounds.

use nalgebra::{DMatrix, DVector};

use super::joint::joint_cholesky;
use crate::calibration::chi_square_moment;
use crate::error::{invalid, Error, Result};

fn check_delta(delta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::DeltaOutOfRange(delta));
    }
    Ok(())
}

/// 1 for homogeneous errors, `2(1+delta)/(1-delta)^2 - 1` otherwise.
pub fn phi(delta: f64, homogeneous: bool) -> Result<f64> {
    check_delta(delta)?;
    Ok(if homogeneous { 1.0 } else { 2.0 * (1.0 + delta) / (1.0 - delta).powi(2) - 1.0 })
}

/// `(1+delta)^{pk/4} (1-delta)^{-3pk/4} exp{phi Delta / (2(1-delta))}`.
pub fn propagation_factor(p: usize, k: usize, delta: f64, big_delta: f64, homogeneous: bool) -> Result<f64> {
    let ph = phi(delta, homogeneous)?;
    if big_delta < 0.0 {
        return Err(invalid("Delta must be nonnegative"));
    }
    let pk = (p * k) as f64;
    Ok(((pk / 4.0) * (1.0 + delta).ln() - (3.0 * pk / 4.0) * (1.0 - delta).ln()
        + ph * big_delta / (2.0 * (1.0 - delta)))
        .exp())
}

/// `(alpha C(p,r))^{1/2}` times the propagation factor. With `alpha = 1` this is
/// the bound on `E |(theta_k - theta)^T B_k (theta_k - theta)|^{r/2}`.
pub fn propagation_bound(p: usize, k: usize, delta: f64, big_delta: f64, r: f64, alpha: f64, homogeneous: bool) -> Result<f64> {
    Ok((alpha * chi_square_moment(p, r)).sqrt() * propagation_factor(p, k, delta, big_delta, homogeneous)?)
}

/// `z_{k*}^{r/2}` plus the propagation bound at `k*` with the budget `Delta`.
pub fn oracle_risk_bound(
    z_kstar: f64,
    p: usize,
    kstar: usize,
    delta: f64,
    budget: f64,
    r: f64,
    alpha: f64,
    homogeneous: bool,
) -> Result<f64> {
    if z_kstar < 0.0 {
        return Err(invalid("critical value must be nonnegative"));
    }
    Ok(z_kstar.powf(r / 2.0) + propagation_bound(p, kstar, delta, budget, r, alpha, homogeneous)?)
}

/// `(n h^d Lambda_0 / sigma_bar_max^2)^{r/2}`, the factor that turns a
/// coordinate risk into one comparable with the quadratic-form bounds.
pub fn componentwise_scaling(n: usize, h: f64, d: usize, lambda0: f64, sigma_bar_max: f64, r: f64) -> f64 {
    (n as f64 * h.powi(d as i32) * lambda0 / (sigma_bar_max * sigma_bar_max)).powf(r / 2.0)
}

/// Exact `E_{theta,Sigma} Z^2` for `Z = dN(theta + b, S0) / dN(theta, S)`:
/// `det(S)^{1/2} det(S0)^{-1} det(M)^{-1/2} exp(2 b^T S0^{-1} M^{-1} S0^{-1} b - b^T S0^{-1} b)`
/// with `M = 2 S0^{-1} - S^{-1}`. Infinite when `M` is not positive definite.
pub fn z2_exact(sigma_k: &DMatrix<f64>, sigma_k0: &DMatrix<f64>, b: &[f64]) -> Result<f64> {
    let dim = sigma_k.nrows();
    if sigma_k0.shape() != sigma_k.shape() || b.len() != dim {
        return Err(invalid("dimension mismatch"));
    }
    let s = joint_cholesky(sigma_k, dim)?;
    let s0 = joint_cholesky(sigma_k0, dim)?;
    let s0_inv = s0.inverse();
    let mut m = 2.0 * &s0_inv - s.inverse();
    crate::linalg::symmetrize(&mut m);
    let Some(mc) = m.clone().cholesky() else {
        return Ok(f64::INFINITY);
    };
    let ld = |c: &nalgebra::Cholesky<f64, nalgebra::Dyn>| 2.0 * c.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let bv = DVector::from_column_slice(b);
    let w = &s0_inv * &bv;
    let expo = 2.0 * w.dot(&mc.solve(&w)) - bv.dot(&w);
    Ok((0.5 * ld(&s) - ld(&s0) - 0.5 * ld(&mc) + expo).exp())
}

/// Homogeneous case `Sigma_k = sigma^2 V`, `Sigma_{k,0} = sigma_0^2 V`, with
/// `delta_1 = b^T V^{-1} b`.
pub fn z2_homogeneous(pk: usize, sigma: f64, sigma0: f64, delta_1: f64) -> f64 {
    let (s2, s02) = (sigma * sigma, sigma0 * sigma0);
    let n = pk as f64;
    (n * (s2 / s02).ln() + n / 2.0 * (s02 / (2.0 * s2 - s02)).ln() + delta_1 / (2.0 * s2 - s02)).exp()
}

/// Lower and upper bounds on `E Z_k^2` in terms of `delta` and `Delta(k)`.
pub fn z2_bounds(pk: usize, delta: f64, big_delta: f64) -> Result<(f64, f64)> {
    check_delta(delta)?;
    let n = pk as f64;
    let lo = n / 2.0 * ((1.0 - delta) / (1.0 + delta).powi(3)).ln()
        + (2.0 * (1.0 - delta) / (1.0 + delta).powi(2) - 1.0) * big_delta / (1.0 + delta);
    let hi = n / 2.0 * ((1.0 + delta) / (1.0 - delta).powi(3)).ln()
        + (2.0 * (1.0 + delta) / (1.0 - delta).powi(2) - 1.0) * big_delta / (1.0 - delta);
    Ok((lo.exp(), hi.exp()))
}

/// Homogeneous-error bounds, exponent `Delta / (1 +- delta)`.
pub fn z2_bounds_homogeneous(pk: usize, delta: f64, big_delta: f64) -> Result<(f64, f64)> {
    check_delta(delta)?;
    let n = pk as f64;
    let lo = n / 2.0 * ((1.0 - delta) / (1.0 + delta).powi(3)).ln() + big_delta / (1.0 + delta);
    let hi = n / 2.0 * ((1.0 + delta) / (1.0 - delta).powi(3)).ln() + big_delta / (1.0 - delta);
    Ok((lo.exp(), hi.exp()))
}

/// Scales `t_0 = 2(1+delta)(1 + u_0^{-gap})` and `t_1 = 2(1+delta)(1 + u^{gap})`
/// bounding the law of `T` between scales `gap` apart.
pub fn deviation_scales(delta: f64, u0: f64, u: f64, gap: usize) -> (f64, f64) {
    let g = gap as i32;
    (2.0 * (1.0 + delta) * (1.0 + u0.powi(-g)), 2.0 * (1.0 + delta) * (1.0 + u.powi(g)))
}

/// `(1 - mu t)^{-p/2}` bound on `E exp{mu T / 2}`, for `mu t < 1`.
pub fn exp_moment_bound(p: usize, mu: f64, t: f64) -> Result<f64> {
    if !(mu > 0.0 && mu * t < 1.0) {
        return Err(invalid("need 0 < mu t < 1"));
    }
    Ok((1.0 - mu * t).powf(-(p as f64) / 2.0))
}

/// `t^r C(p, r)`.
pub fn poly_moment_bound(p: usize, r: f64, t: f64) -> f64 {
    t.powf(r) * chi_square_moment(p, r)
}

/// `(1+delta)^r C(p, r)`.
pub fn quasi_parametric_moment_bound(p: usize, r: f64, delta: f64) -> f64 {
    (1.0 + delta).powf(r) * chi_square_moment(p, r)
}
