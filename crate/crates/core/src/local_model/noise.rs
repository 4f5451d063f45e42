use crate::error::{invalid, Error, Result};

/// Model noise levels `sigma_i`, optional true levels `sigma_{0,i}`, and the
/// declared relative misspecification bound `delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub sigma_model: Vec<f64>,
    pub sigma_true: Option<Vec<f64>>,
    pub delta: f64,
}

impl NoiseModel {
    /// Correctly specified model (`sigma_true = sigma_model`, `delta = 0`).
    pub fn known(sigma_model: Vec<f64>) -> Result<Self> {
        Self::new(sigma_model, None, 0.0)
    }

    pub fn new(sigma_model: Vec<f64>, sigma_true: Option<Vec<f64>>, delta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::DeltaOutOfRange(delta));
        }
        if sigma_model.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(invalid("model noise levels must be finite and positive"));
        }
        if let Some(st) = &sigma_true {
            if st.len() != sigma_model.len() {
                return Err(invalid("sigma_true and sigma_model differ in length"));
            }
            if st.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                return Err(invalid("true noise levels must be finite and positive"));
            }
        }
        Ok(Self {
            sigma_model,
            sigma_true,
            delta,
        })
    }

    pub fn len(&self) -> usize {
        self.sigma_model.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma_model.is_empty()
    }

    /// True noise levels, falling back to the model when none were given.
    pub fn sigma_true_or_model(&self) -> &[f64] {
        self.sigma_true.as_deref().unwrap_or(&self.sigma_model)
    }

    /// `max_i |sigma_{0,i}^2 / sigma_i^2 - 1|`.
    pub fn observed_delta(&self) -> f64 {
        observed_delta(&self.sigma_model, self.sigma_true_or_model())
    }

    /// Whether the variance ratios stay inside `[1 - delta, 1 + delta]`.
    pub fn satisfies_declared_bound(&self) -> bool {
        self.observed_delta() <= self.delta + 1e-12
    }

    /// Same variances up to a common factor (the homogeneous-error case).
    pub fn is_homogeneous(&self) -> bool {
        let st = self.sigma_true_or_model();
        let r0 = st[0] / self.sigma_model[0];
        let s0 = self.sigma_model[0];
        self.sigma_model
            .iter()
            .zip(st)
            .all(|(s, t)| (s - s0).abs() <= 1e-12 * s0 && (t / s - r0).abs() <= 1e-12 * r0)
    }
}

pub fn observed_delta(sigma_model: &[f64], sigma_true: &[f64]) -> f64 {
    sigma_model
        .iter()
        .zip(sigma_true)
        .map(|(s, t)| ((t * t) / (s * s) - 1.0).abs())
        .fold(0.0, f64::max)
}
