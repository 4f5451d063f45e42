//! Fitted-log-likelihood tests and the Lepski-type scale selection.

use nalgebra::DVector;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::local_model::{Basis, LocalFit, LocalProblem, ScaleLadder};
use crate::par;

/// `T_lm = (theta_l - theta_m)^T B_l (theta_l - theta_m)`, `l < m`.
pub fn fll_statistic(fit_l: &LocalFit, fit_m: &LocalFit) -> Result<f64> {
    if fit_l.k >= fit_m.k {
        return Err(Error::ScaleOrder { l: fit_l.k, m: fit_m.k });
    }
    if fit_l.theta.len() != fit_m.theta.len() {
        return Err(invalid("fits have different parameter dimension"));
    }
    let d = &fit_l.theta - &fit_m.theta;
    Ok(d.dot(&(&fit_l.b * &d)).max(0.0))
}

/// Quadratic form `(a - b)^T M (a - b)` on flat slices.
pub(crate) fn weighted_gap(m: &nalgebra::DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    let p = a.len();
    let mut acc = 0.0;
    for i in 0..p {
        let di = a[i] - b[i];
        let mut row = 0.0;
        for j in 0..p {
            row += m[(i, j)] * (a[j] - b[j]);
        }
        acc += di * row;
    }
    acc.max(0.0)
}

/// Strictly upper-triangular table of `T_lm`, 1-based indices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatTable {
    k: usize,
    values: Vec<f64>,
}

impl StatTable {
    pub fn zeros(k: usize) -> Self {
        Self { k, values: vec![0.0; k * k.saturating_sub(1) / 2] }
    }

    /// Builds `T_lm` for flat parameter blocks `thetas[(k-1)p .. kp]`.
    pub fn from_flat(problem: &LocalProblem, thetas: &[f64]) -> Self {
        let k = problem.scales();
        let p = problem.p();
        let mut t = Self::zeros(k);
        for m in 2..=k {
            for l in 1..m {
                let v = weighted_gap(
                    problem.b(l),
                    &thetas[(l - 1) * p..l * p],
                    &thetas[(m - 1) * p..m * p],
                );
                t.set(l, m, v);
            }
        }
        t
    }

    pub fn from_fits(fits: &[LocalFit]) -> Result<Self> {
        let mut t = Self::zeros(fits.len());
        for m in 2..=fits.len() {
            for l in 1..m {
                t.set(l, m, fll_statistic(&fits[l - 1], &fits[m - 1])?);
            }
        }
        Ok(t)
    }

    fn idx(m: usize, l: usize) -> usize {
        (m - 1) * (m - 2) / 2 + (l - 1)
    }

    pub fn scales(&self) -> usize {
        self.k
    }

    pub fn get(&self, l: usize, m: usize) -> f64 {
        assert!(l < m && m <= self.k, "invalid pair ({l}, {m})");
        self.values[Self::idx(m, l)]
    }

    pub fn set(&mut self, l: usize, m: usize, v: f64) {
        assert!(l < m && m <= self.k, "invalid pair ({l}, {m})");
        self.values[Self::idx(m, l)] = v;
    }

    /// `(l, m, T_lm)` in the order `m = 2..K`, `l = 1..m-1`.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.values.len());
        for m in 2..=self.k {
            for l in 1..m {
                out.push((l, m, self.get(l, m)));
            }
        }
        out
    }
}

/// Largest `k` such that `T_lm <= z_l` for all `l < m <= k`, and the first
/// violated pair in scan order.
///
/// The acceptance set only shrinks as `k` grows, so the first `m` with a
/// violation gives `k_hat = m - 1`.
pub fn select_from_table(t: &StatTable, z: &[f64]) -> (usize, Option<(usize, usize)>) {
    for m in 2..=t.scales() {
        for l in 1..m {
            if t.get(l, m) > z[l - 1] {
                return (m - 1, Some((l, m)));
            }
        }
    }
    (t.scales(), None)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionTrace {
    pub k_hat: usize,
    pub statistics: StatTable,
    pub first_violation: Option<(usize, usize)>,
    pub thresholds: Vec<f64>,
}

/// Runs the selection rule over fits `k = 1..K`. Extra thresholds (from a
/// ladder that was truncated after calibration) are ignored.
pub fn select_adaptive(fits: &[LocalFit], z: &[f64]) -> Result<SelectionTrace> {
    if fits.is_empty() {
        return Err(invalid("no fits to select from"));
    }
    let k = fits.len();
    if z.len() + 1 < k {
        return Err(invalid(format!("{} thresholds for {k} scales", z.len())));
    }
    let statistics = StatTable::from_fits(fits)?;
    let thresholds = z[..k - 1].to_vec();
    let (k_hat, first_violation) = select_from_table(&statistics, &thresholds);
    Ok(SelectionTrace { k_hat, statistics, first_violation, thresholds })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptiveEstimate {
    pub k_hat: usize,
    pub theta_hat: Vec<f64>,
    /// `theta_hat_k = theta_{min(k, k_hat)}` for `k = 1..K`.
    pub stepwise: Vec<Vec<f64>>,
    pub fitted: f64,
}

impl AdaptiveEstimate {
    /// `psi0` is the basis evaluated at the zero offset.
    pub fn new(fits: &[LocalFit], k_hat: usize, psi0: &[f64]) -> Self {
        let stepwise: Vec<Vec<f64>> = (1..=fits.len())
            .map(|k| fits[k.min(k_hat) - 1].theta.as_slice().to_vec())
            .collect();
        let theta_hat = fits[k_hat - 1].theta.as_slice().to_vec();
        let fitted = theta_hat.iter().zip(psi0).map(|(a, b)| a * b).sum();
        Self { k_hat, theta_hat, stepwise, fitted }
    }

    pub fn theta_hat_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.theta_hat)
    }
}

/// `e_j^T theta_hat`, 1-based `j`.
pub fn componentwise(estimate: &AdaptiveEstimate, j: usize) -> Result<f64> {
    let p = estimate.theta_hat.len();
    if j == 0 || j > p {
        return Err(Error::IndexOutOfRange { index: j, len: p });
    }
    Ok(estimate.theta_hat[j - 1])
}

#[derive(Debug, Clone, Serialize)]
pub struct PointFit {
    pub x: Vec<f64>,
    pub estimate: Option<AdaptiveEstimate>,
    pub trace: Option<SelectionTrace>,
    /// Usable scales after truncation.
    pub scales: usize,
    pub diagnostic: Option<String>,
}

/// Adaptive estimate at one point; errors become diagnostics.
pub fn fit_point(data: &Dataset, x: &[f64], ladder: &ScaleLadder, basis: &Basis, z: &[f64]) -> PointFit {
    let psi0 = basis.evaluate(&vec![0.0; basis.dim()]);
    let problem = match LocalProblem::new(basis, ladder, &data.points, &data.noise.sigma_model, x) {
        Ok(p) => p,
        Err(e) => {
            return PointFit { x: x.to_vec(), estimate: None, trace: None, scales: 0, diagnostic: Some(e.to_string()) }
        }
    };
    let diagnostic = problem
        .rejected()
        .map(|(k, reason)| format!("ladder truncated at scale {k}: {reason}"));
    let fits = problem.fits(&data.y);
    match select_adaptive(&fits, z) {
        Ok(trace) => PointFit {
            x: x.to_vec(),
            estimate: Some(AdaptiveEstimate::new(&fits, trace.k_hat, &psi0)),
            trace: Some(trace),
            scales: problem.scales(),
            diagnostic,
        },
        Err(e) => PointFit { x: x.to_vec(), estimate: None, trace: None, scales: problem.scales(), diagnostic: Some(e.to_string()) },
    }
}

/// Independent adaptive fits at every grid point, in grid order.
pub fn fit_curve(data: &Dataset, grid: &[Vec<f64>], ladder: &ScaleLadder, basis: &Basis, z: &[f64]) -> Vec<PointFit> {
    par::map_indexed(grid.len(), |i| fit_point(data, &grid[i], ladder, basis, z))
}
