use crate::error::{invalid, Result};
use crate::local_model::{NoiseModel, Points};

/// Observations `Y_i` at design points `X_i` with their noise model.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub points: Points,
    pub y: Vec<f64>,
    pub noise: NoiseModel,
}

impl Dataset {
    pub fn new(points: Points, y: Vec<f64>, noise: NoiseModel) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("dataset is empty"));
        }
        if y.len() != points.len() || noise.len() != points.len() {
            return Err(invalid("points, observations and noise levels differ in length"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(invalid("observations must be finite"));
        }
        Ok(Self { points, y, noise })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }
}
