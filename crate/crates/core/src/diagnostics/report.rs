use serde::Serialize;

use super::bias::{modeling_bias, oracle_index};
use super::bounds::{
    componentwise_scaling, oracle_risk_bound, phi, propagation_bound, z2_bounds, z2_bounds_homogeneous, z2_exact,
};
use super::joint::{component_covariance, joint_covariance, sandwich_range};
use super::kl::kl_joint;
use super::smb::{bias_sup_sequence, component_sd, lambda0, s_j_estimate, smb_from_tradeoff};
use crate::error::{invalid, Result};
use crate::local_model::{observed_delta, LocalProblem};

/// Everything needed to evaluate the bounds at one reference point.
#[derive(Debug, Clone)]
pub struct OracleInputs<'a> {
    pub problem: &'a LocalProblem,
    /// Regression function at all design points.
    pub f_values: &'a [f64],
    /// Reference parameter `theta` (for polynomial bases, the scaled Taylor coefficients at `x`).
    pub theta_ref: &'a [f64],
    /// True noise levels on the active points.
    pub sigma_true_active: &'a [f64],
    pub delta: f64,
    pub homogeneous: bool,
    /// Modeling-bias budget `Delta`.
    pub budget: f64,
    /// Componentwise budgets; when absent the balance-rule budget is used.
    pub budgets_j: Option<Vec<f64>>,
    pub r: f64,
    pub alpha: f64,
    pub z: &'a [f64],
    pub c_j: f64,
    pub n: usize,
    pub d: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleDiagnostics {
    pub k: usize,
    pub bandwidth: f64,
    #[serde(rename = "Delta")]
    pub big_delta: f64,
    #[serde(rename = "Delta_j")]
    pub big_delta_j: Vec<f64>,
    pub kl: f64,
    pub kl_lower: f64,
    pub kl_upper: f64,
    pub sandwich_min: f64,
    pub sandwich_max: f64,
    pub propagation_bound: f64,
    pub z2: f64,
    pub z2_lower: f64,
    pub z2_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentDiagnostics {
    pub j: usize,
    pub s_j: f64,
    /// Ideal index from the bias-variance balance, if any scale qualifies.
    pub ideal_k: Option<usize>,
    pub smb_budget: Option<f64>,
    pub budget: f64,
    pub k_star: Option<usize>,
    pub scaling: Option<f64>,
    pub oracle_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub x: Vec<f64>,
    pub p: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub delta: f64,
    pub observed_delta: f64,
    pub homogeneous: bool,
    pub phi: f64,
    pub u0: Option<f64>,
    pub u: Option<f64>,
    pub lambda0: f64,
    pub budget: f64,
    pub scales: Vec<ScaleDiagnostics>,
    pub k_star: Option<usize>,
    /// Threshold used in the oracle bound; zero when `k* = K`.
    pub z_k_star: Option<f64>,
    pub oracle_bound: Option<f64>,
    pub components: Vec<ComponentDiagnostics>,
}

fn threshold_at(z: &[f64], k: usize, scales: usize) -> f64 {
    if k >= scales {
        0.0
    } else {
        z[k - 1]
    }
}

pub fn oracle_report(inp: &OracleInputs<'_>) -> Result<OracleReport> {
    let prob = inp.problem;
    let k_max = prob.scales();
    let p = prob.p();
    if inp.theta_ref.len() != p {
        return Err(invalid("reference parameter has the wrong dimension"));
    }
    if inp.z.len() + 1 < k_max {
        return Err(invalid(format!("{} thresholds for {k_max} scales", inp.z.len())));
    }
    let sigma = prob.active_sigma();
    let bars = prob.pseudo_true(inp.f_values);
    let ph = phi(inp.delta, inp.homogeneous)?;
    let growth = prob.growth_bounds();

    let mut scales = Vec::with_capacity(k_max);
    let full = joint_covariance(prob, sigma, k_max)?;
    let full0 = joint_covariance(prob, inp.sigma_true_active, k_max)?;
    for k in 1..=k_max {
        let sk = full.view((0, 0), (p * k, p * k)).into_owned();
        let sk0 = full0.view((0, 0), (p * k, p * k)).into_owned();
        let mb = modeling_bias(&bars[..k], inp.theta_ref, &sk)?;
        let kl = kl_joint(&sk, &sk0, mb.delta, inp.delta)?;
        let (lo, hi) = sandwich_range(&sk, &sk0)?;
        let (z2_lower, z2_upper) = if inp.homogeneous {
            z2_bounds_homogeneous(p * k, inp.delta, mb.delta)?
        } else {
            z2_bounds(p * k, inp.delta, mb.delta)?
        };
        scales.push(ScaleDiagnostics {
            k,
            bandwidth: prob.bandwidth(k),
            big_delta: mb.delta,
            big_delta_j: mb.delta_j,
            kl: kl.kl,
            kl_lower: kl.lower,
            kl_upper: kl.upper,
            sandwich_min: lo,
            sandwich_max: hi,
            propagation_bound: propagation_bound(p, k, inp.delta, mb.delta, inp.r, inp.alpha, inp.homogeneous)?,
            z2: z2_exact(&sk, &sk0, &mb.b)?,
            z2_lower,
            z2_upper,
        });
    }

    let deltas: Vec<f64> = scales.iter().map(|s| s.big_delta).collect();
    let k_star = oracle_index(&deltas, inp.budget).ok();
    let z_k_star = k_star.map(|k| threshold_at(inp.z, k, k_max));
    let oracle_bound = match k_star {
        Some(k) => Some(oracle_risk_bound(
            z_k_star.unwrap_or(0.0),
            p,
            k,
            inp.delta,
            inp.budget,
            inp.r,
            inp.alpha,
            inp.homogeneous,
        )?),
        None => None,
    };

    let l0 = lambda0(prob, inp.n, inp.d);
    let sigma_true = inp.sigma_true_active;
    let mut components = Vec::with_capacity(p);
    for j in 1..=p {
        let covs: Vec<_> = (1..=k_max)
            .map(|k| component_covariance(&full.view((0, 0), (p * k, p * k)).into_owned(), p, j))
            .collect::<Result<_>>()?;
        let s_j = s_j_estimate(&covs)?;
        let bias = bias_sup_sequence(&bars, j, inp.theta_ref[j - 1]);
        let sd = component_sd(prob, sigma_true, j);
        let smb = match growth {
            Some((u0, _)) => smb_from_tradeoff(&bias, &sd, inp.c_j, s_j, u0, inp.delta).ok(),
            None => None,
        };
        let budget = match &inp.budgets_j {
            Some(b) => b[j - 1],
            None => smb.map(|s| s.budget).unwrap_or(inp.budget),
        };
        let dj: Vec<f64> = scales.iter().map(|s| s.big_delta_j[j - 1]).collect();
        let kj = oracle_index(&dj, budget).ok();
        let (scaling, bound) = match kj {
            Some(k) => {
                let sbar = prob.sigma_max_running(k);
                let scaling = componentwise_scaling(inp.n, prob.bandwidth(k), inp.d, l0, sbar, inp.r);
                let b = oracle_risk_bound(
                    threshold_at(inp.z, k, k_max),
                    p,
                    k,
                    inp.delta,
                    budget,
                    inp.r,
                    inp.alpha,
                    inp.homogeneous,
                )?;
                (Some(scaling), Some(b))
            }
            None => (None, None),
        };
        components.push(ComponentDiagnostics {
            j,
            s_j,
            ideal_k: smb.map(|s| s.k_star),
            smb_budget: smb.map(|s| s.budget),
            budget,
            k_star: kj,
            scaling,
            oracle_bound: bound,
        });
    }

    Ok(OracleReport {
        x: prob.x().to_vec(),
        p,
        k: k_max,
        delta: inp.delta,
        observed_delta: observed_delta(sigma, sigma_true),
        homogeneous: inp.homogeneous,
        phi: ph,
        u0: growth.map(|g| g.0),
        u: growth.map(|g| g.1),
        lambda0: l0,
        budget: inp.budget,
        scales,
        k_star,
        z_k_star,
        oracle_bound,
        components,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local_model::{Basis, Kernel, Points, ScaleLadder};

    #[test]
    fn report_on_parametric_scene() {
        let n = 200;
        let pts = Points::equidistant(n, 0.0, 1.0);
        let basis = Basis::polynomial(1, 1).unwrap();
        let ladder = ScaleLadder::geometric(0.05, 1.5, 4, Kernel::Boxcar).unwrap();
        let prob = LocalProblem::new(&basis, &ladder, &pts, &vec![1.0; n], &[0.5]).unwrap();
        let f: Vec<f64> = pts.iter().map(|t| 2.0 + 3.0 * (t[0] - 0.5)).collect();
        let s0 = vec![1.1f64.sqrt(); prob.active_indices().len()];
        let z = [5.0, 4.0, 3.0];
        let rep = oracle_report(&OracleInputs {
            problem: &prob,
            f_values: &f,
            theta_ref: &[2.0, 3.0],
            sigma_true_active: &s0,
            delta: 0.1,
            homogeneous: true,
            budget: 1.0,
            budgets_j: None,
            r: 1.0,
            alpha: 1.0,
            z: &z,
            c_j: 1.0,
            n,
            d: 1,
        })
        .unwrap();
        assert_eq!(rep.k_star, Some(4));
        assert_eq!(rep.z_k_star, Some(0.0));
        for s in &rep.scales {
            assert!(s.big_delta < 1e-16);
            assert!(s.kl_lower <= s.kl && s.kl <= s.kl_upper);
            assert!(s.z2_lower <= s.z2 && s.z2 <= s.z2_upper);
            assert!((s.sandwich_min - 1.1).abs() < 1e-9 && (s.sandwich_max - 1.1).abs() < 1e-9);
        }
        assert!(rep.components.iter().all(|c| c.k_star == Some(4)));
        let json = serde_json::to_value(&rep).unwrap();
        assert!(json["scales"][0].get("Delta").is_some());
    }
}
