//! Critical values for the selection rule.
//!
//! Two routes: the closed-form thresholds and a Monte-Carlo search under the
//! pure-noise measure `N(0, Sigma)`. The Monte-Carlo route keeps the `l`-shape
//! of the closed form, `z_l(c) = c + (4 / mu0) r (K - l) log u`, and bisects on
//! the scalar `c` using one fixed ensemble of replicates. `c` may be negative;
//! thresholds are clamped at zero.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::local_model::LocalProblem;
use crate::par::Backend;
use crate::rng::{fill_standard_normal, replicate_rng};
use crate::selector::{select_from_table, weighted_gap, StatTable};
use crate::stats::{ln_gamma, MeanEstimate};

pub const DEFAULT_MU: f64 = 0.125;
pub const MIN_MC_SIZE: usize = 1000;
const BISECTION_STEPS: usize = 12;

/// `C(p, r) = E (chi2_p)^r = 2^r Gamma(r + p/2) / Gamma(p/2)`.
pub fn chi_square_moment(p: usize, r: f64) -> f64 {
    let h = p as f64 / 2.0;
    (r * std::f64::consts::LN_2 + ln_gamma(r + h) - ln_gamma(h)).exp()
}

/// `log{ 2^{2r} [Gamma(2r + p/2) Gamma(p/2)]^{1/2} / Gamma(r + p/2) }`.
pub fn c_bar(p: usize, r: f64) -> f64 {
    let h = p as f64 / 2.0;
    2.0 * r * std::f64::consts::LN_2 + 0.5 * (ln_gamma(2.0 * r + h) + ln_gamma(h)) - ln_gamma(r + h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Theoretical,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalValues {
    pub method: Method,
    pub alpha: f64,
    pub r: f64,
    pub p: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub mu: Option<f64>,
    pub seed: Option<u64>,
    pub mc_size: Option<usize>,
    pub z: Vec<f64>,
}

impl CriticalValues {
    /// Same thresholds everywhere; used for the `z = 0` and `z = inf` limits.
    pub fn constant(p: usize, k: usize, value: f64) -> Self {
        Self {
            method: Method::MonteCarlo,
            alpha: 1.0,
            r: 1.0,
            p,
            k,
            mu: None,
            seed: None,
            mc_size: None,
            z: vec![value; k.saturating_sub(1)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.z.len() + 1 != self.k {
            return Err(invalid(format!("{} thresholds for K = {}", self.z.len(), self.k)));
        }
        if self.z.iter().any(|z| z.is_nan() || *z < 0.0) {
            return Err(invalid("thresholds must be nonnegative"));
        }
        check_alpha_r(self.alpha, self.r)
    }
}

fn check_alpha_r(alpha: f64, r: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid(format!("r must be positive, got {r}")));
    }
    Ok(())
}

fn check_mu_u(mu: f64, u: f64) -> Result<()> {
    if !(mu > 0.0 && mu < 0.25) {
        return Err(Error::InvalidMu(mu));
    }
    if !(u > 1.0 && u.is_finite()) {
        return Err(Error::InvalidU(u));
    }
    Ok(())
}

/// The `l`-independent part of the closed-form threshold (without `4/mu`).
fn level_term(p: usize, r: f64, k: usize, alpha: f64, u: f64, mu: f64) -> f64 {
    (k as f64 / alpha).ln() - p as f64 / 4.0 * (1.0 - 4.0 * mu).ln() - (1.0 - u.powf(-r)).ln() + c_bar(p, r)
}

fn shaped(c: f64, r: f64, k: usize, u: f64, mu: f64) -> Vec<f64> {
    (1..k).map(|l| (c + 4.0 / mu * r * (k - l) as f64 * u.ln()).max(0.0)).collect()
}

/// Closed-form thresholds
/// `z_l = (4/mu) { r (K-l) log u + log(K/alpha) - (p/4) log(1-4mu) - log(1-u^{-r}) + C_bar }`.
pub fn theoretical_cv(p: usize, r: f64, k: usize, alpha: f64, u: f64, mu: f64) -> Result<CriticalValues> {
    check_mu_u(mu, u)?;
    check_alpha_r(alpha, r)?;
    if p == 0 || k == 0 {
        return Err(invalid("p and K must be positive"));
    }
    let c = 4.0 / mu * level_term(p, r, k, alpha, u, mu);
    Ok(CriticalValues {
        method: Method::Theoretical,
        alpha,
        r,
        p,
        k,
        mu: Some(mu),
        seed: None,
        mc_size: None,
        z: shaped(c, r, k, u, mu),
    })
}

/// Closed-form thresholds with `mu` chosen from `{0.01, ..., 0.24}` to minimize `z_1`.
pub fn theoretical_cv_best_mu(p: usize, r: f64, k: usize, alpha: f64, u: f64) -> Result<CriticalValues> {
    let mut best: Option<CriticalValues> = None;
    for i in 1..=24 {
        let cv = theoretical_cv(p, r, k, alpha, u, i as f64 / 100.0)?;
        let better = match &best {
            None => true,
            Some(b) => cv.z.first().copied().unwrap_or(0.0) < b.z.first().copied().unwrap_or(0.0),
        };
        if better {
            best = Some(cv);
        }
    }
    Ok(best.expect("grid is nonempty"))
}

/// Per-replicate statistics under the pure-noise measure.
///
/// `tests` holds `T_lm` (weighted by `B_l`); `losses` holds, at index `(m, k)`,
/// the step-`k` loss `(theta_k - theta_m)^T B_k (theta_k - theta_m)` incurred
/// when the procedure stopped at `m < k`.
#[derive(Debug, Clone)]
pub struct PcEnsemble {
    pub k: usize,
    pub p: usize,
    pub tests: Vec<StatTable>,
    pub losses: Vec<StatTable>,
}

impl PcEnsemble {
    pub fn len(&self) -> usize {
        self.tests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tests.is_empty()
    }

    /// `k_hat` for every replicate.
    pub fn selections(&self, z: &[f64]) -> Vec<usize> {
        self.tests.iter().map(|t| select_from_table(t, z).0).collect()
    }

    /// Estimates `E |(theta_k - theta_hat_k)^T B_k (theta_k - theta_hat_k)|^power`
    /// for `k = 2..K` (entry `k - 2`), reduced in replicate order.
    pub fn moments(&self, z: &[f64], power: f64) -> Vec<MeanEstimate> {
        let sel = self.selections(z);
        (2..=self.k)
            .map(|k| {
                let xs: Vec<f64> = sel
                    .iter()
                    .zip(&self.losses)
                    .map(|(&kh, loss)| if kh >= k { 0.0 } else { loss.get(kh, k).powf(power) })
                    .collect();
                MeanEstimate::from_samples(&xs)
            })
            .collect()
    }
}

/// Draws `mc_size` pure-noise responses `Y = shift + sigma * eps` on the
/// active points and tabulates the statistics. `shift` (active points only)
/// is for the pivotality check; calibration uses `None`.
pub fn simulate_ensemble(
    problem: &LocalProblem,
    sigma_active: &[f64],
    shift: Option<&[f64]>,
    mc_size: usize,
    seed: u64,
    backend: Backend,
) -> PcEnsemble {
    let k = problem.scales();
    let p = problem.p();
    let m = problem.active_indices().len();
    let pairs: Vec<(StatTable, StatTable)> = backend.map(mc_size, |i| {
        let mut rng = replicate_rng(seed, i as u64);
        let mut y = vec![0.0; m];
        fill_standard_normal(&mut rng, &mut y);
        for (j, v) in y.iter_mut().enumerate() {
            *v *= sigma_active[j];
            if let Some(s) = shift {
                *v += s[j];
            }
        }
        let thetas = problem.thetas_active(&y);
        let tests = StatTable::from_flat(problem, &thetas);
        let mut losses = StatTable::zeros(k);
        for kk in 2..=k {
            for mm in 1..kk {
                let v = weighted_gap(
                    problem.b(kk),
                    &thetas[(kk - 1) * p..kk * p],
                    &thetas[(mm - 1) * p..mm * p],
                );
                losses.set(mm, kk, v);
            }
        }
        (tests, losses)
    });
    let (tests, losses) = pairs.into_iter().unzip();
    PcEnsemble { k, p, tests, losses }
}

/// Growth factor `u` of the actual ladder, from the eigenvalues of
/// `B_{k-1}^{-1/2} B_k B_{k-1}^{-1/2}`.
pub fn ladder_growth(problem: &LocalProblem) -> Result<f64> {
    let (_, u) = problem
        .growth_bounds()
        .ok_or_else(|| invalid("calibration needs at least two scales"))?;
    if u <= 1.0 {
        return Err(Error::InvalidU(u));
    }
    Ok(u)
}

fn pc_holds(moments: &[MeanEstimate], bound: f64) -> bool {
    moments.iter().all(|m| m.mean <= bound)
}

/// Monte-Carlo thresholds: the smallest `c` (to bisection resolution) for
/// which every empirical propagation condition holds on the ensemble.
pub fn mc_calibrate(problem: &LocalProblem, alpha: f64, r: f64, mc_size: usize, seed: u64) -> Result<CriticalValues> {
    mc_calibrate_with(problem, alpha, r, mc_size, seed, Backend::default())
}

pub fn mc_calibrate_with(
    problem: &LocalProblem,
    alpha: f64,
    r: f64,
    mc_size: usize,
    seed: u64,
    backend: Backend,
) -> Result<CriticalValues> {
    check_alpha_r(alpha, r)?;
    if mc_size < MIN_MC_SIZE {
        return Err(invalid(format!("mc_size must be at least {MIN_MC_SIZE}, got {mc_size}")));
    }
    if let Some((k, reason)) = problem.rejected() {
        return Err(Error::SingularDesign { scale: *k, reason: reason.clone() });
    }
    let k = problem.scales();
    let p = problem.p();
    let u = ladder_growth(problem)?;
    let mu = DEFAULT_MU;
    let bound = alpha * chi_square_moment(p, r);
    let ens = simulate_ensemble(problem, problem.active_sigma(), None, mc_size, seed, backend);
    let ok = |c: f64| pc_holds(&ens.moments(&shaped(c, r, k, u, mu), r), bound);

    let mut hi = 4.0 / mu * level_term(p, r, k, alpha, u, mu);
    if !ok(hi) {
        return Err(Error::CalibrationFailed(format!(
            "closed-form thresholds violate the empirical propagation conditions (mc_size = {mc_size})"
        )));
    }
    // The shape term alone usually satisfies PC, so the search runs down to
    // the `c` at which every (clamped) threshold is zero.
    let floor = -4.0 / mu * r * (k - 1) as f64 * u.ln();
    let c = if ok(floor) {
        floor
    } else {
        let mut lo = floor;
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    Ok(CriticalValues {
        method: Method::MonteCarlo,
        alpha,
        r,
        p,
        k,
        mu: Some(mu),
        seed: Some(seed),
        mc_size: Some(mc_size),
        z: shaped(c, r, k, u, mu),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcCheck {
    pub k: usize,
    pub moment: f64,
    pub std_error: f64,
    pub bound: f64,
    /// Bound widened by three relative standard errors.
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcReport {
    pub alpha: f64,
    pub r: f64,
    pub mc_size: usize,
    pub seed: u64,
    pub checks: Vec<PcCheck>,
    pub pass: bool,
}

/// Fresh-seed estimate of every propagation-condition moment. A check passes
/// when `moment <= alpha C(p,r) (1 + 3 SE / moment)`.
pub fn validate_pc(problem: &LocalProblem, z: &[f64], alpha: f64, r: f64, mc_size: usize, seed: u64) -> Result<PcReport> {
    check_alpha_r(alpha, r)?;
    let k = problem.scales();
    if z.len() + 1 < k {
        return Err(invalid(format!("{} thresholds for {k} scales", z.len())));
    }
    let bound = alpha * chi_square_moment(problem.p(), r);
    let ens = simulate_ensemble(problem, problem.active_sigma(), None, mc_size, seed, Backend::default());
    let checks: Vec<PcCheck> = ens
        .moments(&z[..k - 1], r)
        .into_iter()
        .enumerate()
        .map(|(i, m)| {
            let tolerance = bound * (1.0 + 3.0 * m.relative_error());
            PcCheck { k: i + 2, moment: m.mean, std_error: m.std_error, bound, tolerance, pass: m.mean <= tolerance }
        })
        .collect();
    let pass = checks.iter().all(|c| c.pass);
    Ok(PcReport { alpha, r, mc_size, seed, checks, pass })
}
