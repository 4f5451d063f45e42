use serde::{Deserialize, Serialize};

use super::functions::TestFunction;
use crate::error::{invalid, Result};
use crate::local_model::{observed_delta, Basis, BasisSpec, LadderSpec, NoiseModel, Points, ScaleLadder};
use crate::rng::{fill_standard_normal, replicate_rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesignSpec {
    /// `n` midpoints of a uniform partition of `[lo, hi]`.
    Equidistant { lo: f64, hi: f64 },
    /// Explicit rows; `n` must equal their count.
    Explicit { points: Vec<Vec<f64>> },
}

/// Model standard deviations `sigma_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SigmaSpec {
    Constant { value: f64 },
    /// Linear in the design index from `from` to `to`.
    Ramp { from: f64, to: f64 },
    Values { values: Vec<f64> },
}

/// True standard deviations, described relative to the model through the
/// variance ratio `sigma_{0,i}^2 / sigma_i^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SigmaTrueSpec {
    /// Correct specification.
    Same,
    /// Constant ratio `ratio`.
    Scaled { ratio: f64 },
    /// Ratio moving linearly from `1 - amplitude` to `1 + amplitude`.
    Ramp { amplitude: f64 },
    /// Ratio `1 + amplitude * sin(2 pi frequency t)`.
    Sinusoidal { amplitude: f64, frequency: f64 },
    /// No noise at all.
    Zero,
    Values { values: Vec<f64> },
}

fn default_replicates() -> usize {
    1000
}

fn default_r() -> f64 {
    0.5
}

fn default_alpha() -> f64 {
    1.0
}

fn default_budget() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    #[serde(default)]
    pub name: String,
    pub f: TestFunction,
    pub design: DesignSpec,
    pub n: usize,
    pub sigma_model: SigmaSpec,
    pub sigma_true: SigmaTrueSpec,
    /// Declared misspecification level; defaults to the observed one.
    #[serde(default)]
    pub delta: Option<f64>,
    pub seed: u64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    pub ladder: LadderSpec,
    #[serde(default)]
    pub basis: BasisSpec,
    #[serde(default = "default_r")]
    pub r: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Reference points.
    #[serde(default)]
    pub x: Vec<Vec<f64>>,
    /// Modeling-bias budget `Delta`.
    #[serde(default = "default_budget", rename = "Delta")]
    pub budget: f64,
}

/// A scene with every derived quantity materialized.
#[derive(Debug, Clone)]
pub struct Scene {
    pub spec: SceneSpec,
    pub points: Points,
    pub f_values: Vec<f64>,
    pub sigma_model: Vec<f64>,
    pub sigma_true: Vec<f64>,
    pub delta: f64,
    pub ladder: ScaleLadder,
    pub basis: Basis,
}

impl SceneSpec {
    pub fn resolve(&self) -> Result<Scene> {
        if self.n == 0 {
            return Err(invalid("scene needs n >= 1"));
        }
        let points = match &self.design {
            DesignSpec::Equidistant { lo, hi } => {
                if !(hi > lo) {
                    return Err(invalid("design interval must have hi > lo"));
                }
                Points::equidistant(self.n, *lo, *hi)
            }
            DesignSpec::Explicit { points } => {
                if points.len() != self.n {
                    return Err(invalid(format!("{} explicit points for n = {}", points.len(), self.n)));
                }
                Points::from_rows(points)?
            }
        };
        let n = self.n;
        let sigma_model: Vec<f64> = match &self.sigma_model {
            SigmaSpec::Constant { value } => vec![*value; n],
            SigmaSpec::Ramp { from, to } => (0..n).map(|i| from + (to - from) * frac(i, n)).collect(),
            SigmaSpec::Values { values } => values.clone(),
        };
        if sigma_model.len() != n || sigma_model.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(invalid("model noise levels must be n positive numbers"));
        }
        let ratio = |i: usize, t: &[f64]| -> f64 {
            match &self.sigma_true {
                SigmaTrueSpec::Same => 1.0,
                SigmaTrueSpec::Scaled { ratio } => *ratio,
                SigmaTrueSpec::Ramp { amplitude } => 1.0 - amplitude + 2.0 * amplitude * frac(i, n),
                SigmaTrueSpec::Sinusoidal { amplitude, frequency } => {
                    1.0 + amplitude * (2.0 * std::f64::consts::PI * frequency * t[0]).sin()
                }
                SigmaTrueSpec::Zero => 0.0,
                SigmaTrueSpec::Values { .. } => unreachable!(),
            }
        };
        let sigma_true: Vec<f64> = match &self.sigma_true {
            SigmaTrueSpec::Values { values } => values.clone(),
            _ => (0..n).map(|i| sigma_model[i] * ratio(i, points.point(i)).max(0.0).sqrt()).collect(),
        };
        if sigma_true.len() != n || sigma_true.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(invalid("true noise levels must be n nonnegative numbers"));
        }
        let observed = observed_delta(&sigma_model, &sigma_true);
        let delta = self.delta.unwrap_or(observed);
        let f_values = points.iter().map(|t| self.f.value(t)).collect();
        let ladder = self.ladder.build()?;
        let basis = self.basis.build(points.dim())?;
        Ok(Scene { spec: self.clone(), points, f_values, sigma_model, sigma_true, delta, ladder, basis })
    }
}

fn frac(i: usize, n: usize) -> f64 {
    if n == 1 {
        0.5
    } else {
        i as f64 / (n - 1) as f64
    }
}

impl Scene {
    /// Checks the declared level against the observed variance ratios.
    pub fn validate(&self) -> Result<()> {
        let observed = observed_delta(&self.sigma_model, &self.sigma_true);
        if !(0.0..1.0).contains(&self.delta) {
            return Err(crate::Error::DeltaOutOfRange(self.delta));
        }
        if observed > self.delta + 1e-12 {
            return Err(invalid(format!(
                "observed misspecification {observed} exceeds the declared level {}",
                self.delta
            )));
        }
        Ok(())
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        NoiseModel::new(self.sigma_model.clone(), Some(self.sigma_true.clone()), self.delta)
    }

    pub fn is_homogeneous(&self) -> bool {
        let s0 = self.sigma_model[0];
        let r0 = self.sigma_true[0] / s0;
        self.sigma_model
            .iter()
            .zip(&self.sigma_true)
            .all(|(s, t)| (s - s0).abs() <= 1e-12 * s0 && (t / s - r0).abs() <= 1e-12 * r0.max(1e-300))
    }

    /// Reference parameter at `x`: the Taylor coefficients of `f`.
    pub fn theta_ref(&self, x: &[f64]) -> Vec<f64> {
        self.spec.f.taylor(x, self.basis.exponents())
    }

    /// Observations of replicate `replicate`: `Y_i = f(X_i) + sigma_{0,i} eps_i`.
    pub fn generate(&self, replicate: u64) -> Vec<f64> {
        let mut rng = replicate_rng(self.spec.seed, replicate);
        let mut y = vec![0.0; self.points.len()];
        fill_standard_normal(&mut rng, &mut y);
        for ((v, f), s) in y.iter_mut().zip(&self.f_values).zip(&self.sigma_true) {
            *v = f + s * *v;
        }
        y
    }

    pub fn label(&self, x: &[f64]) -> String {
        let coords: Vec<String> = x.iter().map(|v| format!("{v}")).collect();
        let name = if self.spec.name.is_empty() { "scene" } else { &self.spec.name };
        format!("{name}@{}", coords.join(";"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local_model::Kernel;
    use crate::stats::MeanEstimate;

    pub(crate) fn spec(sigma_true: SigmaTrueSpec) -> SceneSpec {
        SceneSpec {
            name: "t".into(),
            f: TestFunction::Sine { amplitude: 1.0, frequency: 1.0 },
            design: DesignSpec::Equidistant { lo: 0.0, hi: 1.0 },
            n: 20,
            sigma_model: SigmaSpec::Ramp { from: 0.5, to: 1.5 },
            sigma_true,
            delta: None,
            seed: 42,
            replicates: 10,
            ladder: LadderSpec::geometric(0.1, 1.5, 3, Kernel::Boxcar),
            basis: BasisSpec::Polynomial { degree: 1 },
            r: 0.5,
            alpha: 1.0,
            x: vec![vec![0.5]],
            budget: 1.0,
        }
    }

    #[test]
    fn noiseless_scene_returns_f() {
        let s = spec(SigmaTrueSpec::Zero).resolve().unwrap();
        assert_eq!(s.generate(3), s.f_values);
    }

    #[test]
    fn generation_is_deterministic() {
        let s = spec(SigmaTrueSpec::Same).resolve().unwrap();
        assert_eq!(s.generate(7), s.generate(7));
        assert_ne!(s.generate(7), s.generate(8));
    }

    #[test]
    fn noise_variance_matches_truth() {
        let s = spec(SigmaTrueSpec::Sinusoidal { amplitude: 0.3, frequency: 2.0 }).resolve().unwrap();
        let reps = 100_000;
        for i in [0usize, 7, 19] {
            let sq: Vec<f64> = (0..reps)
                .map(|r| {
                    let y = s.generate(r as u64);
                    (y[i] - s.f_values[i]).powi(2)
                })
                .collect();
            let est = MeanEstimate::from_samples(&sq);
            let want = s.sigma_true[i].powi(2);
            assert!((est.mean - want).abs() <= 3.0 * est.std_error, "{} vs {want}", est.mean);
        }
    }

    #[test]
    fn declared_level() {
        let s = spec(SigmaTrueSpec::Ramp { amplitude: 0.2 }).resolve().unwrap();
        assert!((s.delta - 0.2).abs() < 1e-12);
        s.validate().unwrap();
        let mut sp = spec(SigmaTrueSpec::Scaled { ratio: 1.3 });
        sp.delta = Some(0.1);
        assert!(sp.resolve().unwrap().validate().is_err());
        let json = serde_json::to_string(&spec(SigmaTrueSpec::Same)).unwrap();
        let back: SceneSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec(SigmaTrueSpec::Same));
    }
}
