use serde::Serialize;

use super::scene::Scene;
use crate::calibration::CriticalValues;
use crate::diagnostics::{oracle_report, OracleInputs, OracleReport};
use crate::error::{invalid, Error, Result};
use crate::local_model::LocalProblem;
use crate::par::Backend;
use crate::selector::{select_from_table, weighted_gap, StatTable};
use crate::stats::MeanEstimate;

/// Largest tolerated share of non-finite replicates.
pub const MAX_EXCLUSION_RATE: f64 = 1e-3;

/// One line of a risk table. `k` is empty for statistics of the adaptive
/// estimate as a whole.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskRow {
    pub scene: String,
    pub k: Option<usize>,
    pub statistic: String,
    pub estimate: f64,
    pub std_error: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointRisk {
    pub scene: String,
    pub x: Vec<f64>,
    pub scales: usize,
    pub oracle: Option<OracleReport>,
    /// Why the oracle diagnostics are missing, if they are.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskTable {
    pub replicates: usize,
    pub excluded: usize,
    pub rows: Vec<RiskRow>,
    pub points: Vec<PointRisk>,
}

impl RiskTable {
    pub fn find(&self, scene: &str, k: Option<usize>, statistic: &str) -> Option<&RiskRow> {
        self.rows
            .iter()
            .find(|r| r.scene == scene && r.k == k && r.statistic == statistic)
    }
}

/// Per-point state shared by all replicates.
struct PointSetup {
    label: String,
    problem: LocalProblem,
    z: Vec<f64>,
    f_x: f64,
    psi0: Vec<f64>,
    oracle: Option<OracleReport>,
    note: Option<String>,
    /// `(j, k*(j), scaling)`.
    component_oracles: Vec<(usize, usize, f64)>,
}

/// Names of the per-replicate samples for one point, in storage order.
fn sample_layout(s: &PointSetup) -> Vec<(Option<usize>, String)> {
    let k = s.problem.scales();
    let mut out = Vec::new();
    for kk in 2..=k {
        out.push((Some(kk), "propagation".to_string()));
    }
    for kk in 2..=k {
        out.push((Some(kk), "pc".to_string()));
    }
    if let Some(ks) = s.oracle.as_ref().and_then(|o| o.k_star) {
        out.push((Some(ks), "oracle".to_string()));
    }
    for (j, kj, _) in &s.component_oracles {
        out.push((Some(*kj), format!("oracle_j{j}")));
    }
    out.push((None, "abs_error".to_string()));
    for kk in 1..=k {
        out.push((Some(kk), "abs_error".to_string()));
    }
    out.push((None, "k_hat".to_string()));
    out.push((None, "full_scale".to_string()));
    out
}

fn point_samples(s: &PointSetup, y: &[f64], r: f64) -> Vec<f64> {
    let prob = &s.problem;
    let k = prob.scales();
    let p = prob.p();
    let thetas = prob.thetas_active(&prob.gather(y));
    let theta = |kk: usize| &thetas[(kk - 1) * p..kk * p];
    let table = StatTable::from_flat(prob, &thetas);
    let (k_hat, _) = select_from_table(&table, &s.z);
    let mut out = Vec::new();
    let steps: Vec<f64> = (2..=k)
        .map(|kk| weighted_gap(prob.b(kk), theta(kk), theta(kk.min(k_hat))))
        .collect();
    out.extend(steps.iter().map(|v| v.powf(r / 2.0)));
    out.extend(steps.iter().map(|v| v.powf(r)));
    if let Some(ks) = s.oracle.as_ref().and_then(|o| o.k_star) {
        out.push(weighted_gap(prob.b(ks), theta(ks), theta(k_hat)).powf(r / 2.0));
    }
    for (j, kj, scaling) in &s.component_oracles {
        out.push(scaling * (theta(*kj)[j - 1] - theta(k_hat)[j - 1]).abs().powf(r));
    }
    let fitted = |kk: usize| theta(kk).iter().zip(&s.psi0).map(|(a, b)| a * b).sum::<f64>();
    out.push((fitted(k_hat) - s.f_x).abs().powf(r));
    for kk in 1..=k {
        out.push((fitted(kk) - s.f_x).abs().powf(r));
    }
    out.push(k_hat as f64);
    out.push(if k_hat == k { 1.0 } else { 0.0 });
    out
}

fn setup_point(scene: &Scene, x: &[f64], cv: &CriticalValues) -> Result<PointSetup> {
    let problem = LocalProblem::new(&scene.basis, &scene.ladder, &scene.points, &scene.sigma_model, x)?;
    let k = problem.scales();
    if cv.z.len() + 1 < k {
        return Err(invalid(format!("{} thresholds for {k} scales", cv.z.len())));
    }
    let z = cv.z[..k - 1].to_vec();
    let theta_ref = scene.theta_ref(x);
    let sigma_true_active = problem.gather(&scene.sigma_true);
    let inputs = OracleInputs {
        problem: &problem,
        f_values: &scene.f_values,
        theta_ref: &theta_ref,
        sigma_true_active: &sigma_true_active,
        delta: scene.delta,
        homogeneous: scene.is_homogeneous(),
        budget: scene.spec.budget,
        budgets_j: None,
        r: scene.spec.r,
        alpha: scene.spec.alpha,
        z: &z,
        c_j: 1.0,
        n: scene.points.len(),
        d: scene.points.dim(),
    };
    let (oracle, note) = if theta_ref.len() != problem.p() {
        (None, Some("no reference parameter for a custom basis".to_string()))
    } else {
        match oracle_report(&inputs) {
            Ok(rep) => (Some(rep), None),
            Err(e) => (None, Some(e.to_string())),
        }
    };
    let component_oracles = oracle
        .as_ref()
        .map(|o| {
            o.components
                .iter()
                .filter_map(|c| Some((c.j, c.k_star?, c.scaling?)))
                .collect()
        })
        .unwrap_or_default();
    let mut note = note;
    if let Some((kk, reason)) = problem.rejected() {
        let msg = format!("ladder truncated at scale {kk}: {reason}");
        note = Some(match note {
            Some(n) => format!("{msg}; {n}"),
            None => msg,
        });
    }
    Ok(PointSetup {
        label: scene.label(x),
        f_x: scene.spec.f.value(x),
        psi0: scene.basis.evaluate(&vec![0.0; scene.basis.dim()]),
        problem,
        z,
        oracle,
        note,
        component_oracles,
    })
}

/// Empirical risks of the adaptive procedure at every reference point of the
/// scene, over `scene.spec.replicates` replicates.
pub fn risk_experiment(scene: &Scene, cv: &CriticalValues) -> Result<RiskTable> {
    risk_experiment_with(scene, cv, scene.spec.replicates, Backend::default())
}

pub fn risk_experiment_with(scene: &Scene, cv: &CriticalValues, replicates: usize, backend: Backend) -> Result<RiskTable> {
    if replicates == 0 {
        return Err(invalid("risk experiment needs at least one replicate"));
    }
    if scene.spec.x.is_empty() {
        return Err(invalid("scene has no reference points"));
    }
    let r = scene.spec.r;
    let setups: Vec<PointSetup> = scene
        .spec
        .x
        .iter()
        .map(|x| setup_point(scene, x, cv))
        .collect::<Result<_>>()?;

    let samples: Vec<Option<Vec<Vec<f64>>>> = backend.map(replicates, |i| {
        let y = scene.generate(i as u64);
        let per_point: Vec<Vec<f64>> = setups.iter().map(|s| point_samples(s, &y, r)).collect();
        let finite = per_point.iter().flatten().all(|v| v.is_finite());
        finite.then_some(per_point)
    });
    let kept: Vec<&Vec<Vec<f64>>> = samples.iter().flatten().collect();
    let excluded = replicates - kept.len();
    if excluded as f64 > MAX_EXCLUSION_RATE * replicates as f64 {
        return Err(Error::ExperimentFailed(format!(
            "{excluded} of {replicates} replicates produced non-finite losses"
        )));
    }
    if kept.is_empty() {
        return Err(Error::ExperimentFailed("every replicate was excluded".into()));
    }

    let mut rows = Vec::new();
    let mut points = Vec::new();
    for (pi, s) in setups.iter().enumerate() {
        for (col, (k, statistic)) in sample_layout(s).into_iter().enumerate() {
            let xs: Vec<f64> = kept.iter().map(|rep| rep[pi][col]).collect();
            let est = MeanEstimate::from_samples(&xs);
            rows.push(RiskRow {
                scene: s.label.clone(),
                k,
                statistic,
                estimate: est.mean,
                std_error: est.std_error,
                replicates: est.n,
            });
        }
        points.push(PointRisk {
            scene: s.label.clone(),
            x: s.problem.x().to_vec(),
            scales: s.problem.scales(),
            oracle: s.oracle.clone(),
            note: s.note.clone(),
        });
    }
    Ok(RiskTable { replicates, excluded, rows, points })
}
