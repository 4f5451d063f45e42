use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::joint::{component_covariance, joint_cholesky};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelingBias {
    pub k: usize,
    /// Stacked `theta_bar_l - theta`, `l = 1..k`.
    pub b: Vec<f64>,
    pub delta: f64,
    /// Componentwise `Delta_j(k)`, `j = 1..p`.
    pub delta_j: Vec<f64>,
}

/// `Delta(k) = b(k)^T Sigma_k^{-1} b(k)` and its componentwise versions.
pub fn modeling_bias(theta_bars: &[DVector<f64>], theta_ref: &[f64], sigma_k: &DMatrix<f64>) -> Result<ModelingBias> {
    let k = theta_bars.len();
    let p = theta_ref.len();
    if k == 0 || sigma_k.nrows() != p * k {
        return Err(invalid("joint covariance does not match the stacked parameters"));
    }
    let mut b = Vec::with_capacity(p * k);
    for t in theta_bars {
        if t.len() != p {
            return Err(invalid("parameter dimension mismatch"));
        }
        b.extend(t.iter().zip(theta_ref).map(|(a, c)| a - c));
    }
    let bv = DVector::from_column_slice(&b);
    let chol = joint_cholesky(sigma_k, k)?;
    let delta = bv.dot(&chol.solve(&bv)).max(0.0);
    let mut delta_j = Vec::with_capacity(p);
    for j in 1..=p {
        let s = component_covariance(sigma_k, p, j)?;
        let bj = DVector::from_iterator(k, (0..k).map(|l| b[l * p + j - 1]));
        let c = joint_cholesky(&s, k)?;
        delta_j.push(bj.dot(&c.solve(&bj)).max(0.0));
    }
    Ok(ModelingBias { k, b, delta, delta_j })
}

/// `max{k : Delta(k) <= budget}` (1-based).
pub fn oracle_index(deltas: &[f64], budget: f64) -> Result<usize> {
    if deltas.is_empty() {
        return Err(invalid("empty modeling-bias sequence"));
    }
    if deltas[0] > budget {
        return Err(Error::NoFeasibleScale(format!("Delta(1) = {} exceeds the budget {budget}", deltas[0])));
    }
    Ok(deltas
        .iter()
        .enumerate()
        .filter(|(_, d)| **d <= budget)
        .map(|(i, _)| i + 1)
        .max()
        .expect("Delta(1) qualifies"))
}
