use serde::Serialize;

use super::risk::risk_experiment_with;
use super::scene::{SceneSpec, SigmaTrueSpec};
use crate::calibration::mc_calibrate;
use crate::diagnostics::propagation_factor;
use crate::error::{invalid, Error, Result};
use crate::local_model::LocalProblem;
use crate::par::Backend;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub n: usize,
    pub delta: f64,
    /// `E |(theta_K - theta_hat_K)^T B_K (theta_K - theta_hat_K)|^{r/2}`.
    pub risk: f64,
    pub std_error: f64,
    /// `risk / risk at delta = 0` for the same `n`.
    pub inflation: f64,
    pub bound_factor: f64,
    #[serde(rename = "Delta")]
    pub big_delta: f64,
    /// Exact `E[Z_K^2]`.
    pub z2: f64,
    pub within_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub deltas: Vec<f64>,
    pub ns: Vec<usize>,
    pub cells: Vec<SweepCell>,
    /// `(n, inflation non-decreasing in delta)`.
    pub monotone: Vec<(usize, bool)>,
    pub pass: bool,
}

/// Runs `template` (first reference point) with `sigma_0^2 = (1 + delta) sigma^2`
/// for every `(delta, n)`. Thresholds are calibrated once per `n` under the
/// model and every `delta` reuses the same replicate seeds.
pub fn delta_sweep(
    template: &SceneSpec,
    deltas: &[f64],
    ns: &[usize],
    mc_size: usize,
    calibration_seed: u64,
) -> Result<SweepReport> {
    if deltas.is_empty() || ns.is_empty() {
        return Err(invalid("delta and n grids must be nonempty"));
    }
    let x = template.x.first().ok_or_else(|| invalid("scene has no reference point"))?.clone();
    let mut deltas = deltas.to_vec();
    deltas.sort_by(f64::total_cmp);
    if deltas[0] != 0.0 {
        deltas.insert(0, 0.0);
    }
    let mut cells = Vec::new();
    let mut monotone = Vec::new();
    for &n in ns {
        let mut spec = template.clone();
        spec.n = n;
        spec.x = vec![x.clone()];
        spec.sigma_true = SigmaTrueSpec::Same;
        spec.delta = Some(0.0);
        let base = spec.resolve()?;
        let problem = LocalProblem::new(&base.basis, &base.ladder, &base.points, &base.sigma_model, &x)?;
        let k = problem.scales();
        let p = problem.p();
        let cv = mc_calibrate(&problem, spec.alpha, spec.r, mc_size, calibration_seed)?;

        let mut row: Vec<SweepCell> = Vec::new();
        for &delta in &deltas {
            let mut s = spec.clone();
            s.sigma_true = SigmaTrueSpec::Scaled { ratio: 1.0 + delta };
            s.delta = Some(delta);
            let scene = s.resolve()?;
            scene.validate()?;
            let table = risk_experiment_with(&scene, &cv, s.replicates, Backend::default())?;
            let label = scene.label(&x);
            let risk_row = table
                .find(&label, Some(k), "propagation")
                .ok_or_else(|| Error::ExperimentFailed(format!("no scale-{k} risk for {label}")))?;
            let oracle = table.points[0]
                .oracle
                .as_ref()
                .ok_or_else(|| Error::ExperimentFailed(table.points[0].note.clone().unwrap_or_default()))?;
            let at_k = &oracle.scales[k - 1];
            let bound_factor = propagation_factor(p, k, delta, at_k.big_delta, scene.is_homogeneous())?;
            let r0 = row.first().map(|c| c.risk).unwrap_or(risk_row.estimate);
            let inflation = if r0 > 0.0 {
                risk_row.estimate / r0
            } else if risk_row.estimate == 0.0 {
                1.0
            } else {
                f64::INFINITY
            };
            row.push(SweepCell {
                n,
                delta,
                risk: risk_row.estimate,
                std_error: risk_row.std_error,
                inflation,
                bound_factor,
                big_delta: at_k.big_delta,
                z2: at_k.z2,
                within_bound: inflation <= bound_factor,
            });
        }
        let mono = row.windows(2).all(|w| w[1].inflation >= w[0].inflation);
        monotone.push((n, mono));
        cells.extend(row);
    }
    let pass = monotone.iter().all(|(_, m)| *m) && cells.iter().all(|c| c.within_bound);
    Ok(SweepReport { deltas, ns: ns.to_vec(), cells, monotone, pass })
}
