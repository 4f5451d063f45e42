use serde::{Deserialize, Serialize};

use super::points::{euclidean, Points};
use crate::error::{invalid, Result};

/// Radial localizing kernel; every variant maps to `[0, 1]` and is
/// nonincreasing in `|u| / h`, so weights are nested across growing bandwidths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    #[default]
    Boxcar,
    Epanechnikov,
    TruncatedGaussian,
}

impl Kernel {
    /// Weight of a point at Euclidean distance `dist` for bandwidth `h`.
    pub fn weight(self, dist: f64, h: f64) -> f64 {
        let s = dist / h;
        match self {
            Kernel::Boxcar => {
                if dist <= h {
                    1.0
                } else {
                    0.0
                }
            }
            Kernel::Epanechnikov => (1.0 - s * s).max(0.0),
            Kernel::TruncatedGaussian => {
                if dist <= 3.0 * h {
                    (-0.5 * s * s).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// Radius beyond which the weight is exactly zero.
    pub fn support_radius(self, h: f64) -> f64 {
        match self {
            Kernel::Boxcar | Kernel::Epanechnikov => h,
            Kernel::TruncatedGaussian => 3.0 * h,
        }
    }
}

/// Nested localization schemes `W_1 <= ... <= W_K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleLadder {
    pub bandwidths: Vec<f64>,
    pub kernel: Kernel,
    /// Nominal lower growth bound `u0 > 1`.
    pub u0: f64,
    /// Nominal upper growth bound `u >= u0`.
    pub u: f64,
}

impl ScaleLadder {
    pub fn new(bandwidths: Vec<f64>, kernel: Kernel) -> Result<Self> {
        if bandwidths.is_empty() {
            return Err(invalid("a ladder needs at least one bandwidth"));
        }
        if bandwidths.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(invalid("bandwidths must be finite and positive"));
        }
        if bandwidths.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("bandwidths must be strictly increasing"));
        }
        let ratios: Vec<f64> = bandwidths.windows(2).map(|w| w[1] / w[0]).collect();
        let u0 = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let u = ratios.iter().copied().fold(0.0, f64::max);
        let (u0, u) = if ratios.is_empty() { (f64::NAN, f64::NAN) } else { (u0, u) };
        Ok(Self {
            bandwidths,
            kernel,
            u0,
            u,
        })
    }

    /// `h_k = h_1 * growth^(k-1)` for `k = 1..=scales`.
    pub fn geometric(h1: f64, growth: f64, scales: usize, kernel: Kernel) -> Result<Self> {
        if !(growth > 1.0) {
            return Err(invalid("geometric growth factor must exceed 1"));
        }
        let bandwidths = (0..scales).map(|k| h1 * growth.powi(k as i32)).collect();
        let mut ladder = Self::new(bandwidths, kernel)?;
        ladder.u0 = growth;
        ladder.u = growth;
        Ok(ladder)
    }

    pub fn scales(&self) -> usize {
        self.bandwidths.len()
    }

    /// Bandwidth of scale `k` (1-based).
    pub fn bandwidth(&self, k: usize) -> f64 {
        self.bandwidths[k - 1]
    }
}

/// Serializable ladder description: explicit bandwidths, or a geometric
/// ladder `h_1 * growth^(k-1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderSpec {
    #[serde(default)]
    pub kernel: Kernel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidths: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scales: Option<usize>,
}

pub const DEFAULT_GROWTH: f64 = 1.25;

impl LadderSpec {
    pub fn geometric(h1: f64, growth: f64, scales: usize, kernel: Kernel) -> Self {
        Self { kernel, bandwidths: None, h1: Some(h1), growth: Some(growth), scales: Some(scales) }
    }

    pub fn build(&self) -> Result<ScaleLadder> {
        if let Some(bw) = &self.bandwidths {
            return ScaleLadder::new(bw.clone(), self.kernel);
        }
        let h1 = self.h1.ok_or_else(|| invalid("ladder needs either bandwidths or h1"))?;
        let scales = self.scales.ok_or_else(|| invalid("geometric ladder needs the number of scales"))?;
        ScaleLadder::geometric(h1, self.growth.unwrap_or(DEFAULT_GROWTH), scales, self.kernel)
    }
}

/// Kernel weights `w_{k,i}(x)` of every design point for scale `k` (1-based).
pub fn build_weights(ladder: &ScaleLadder, points: &Points, x: &[f64], k: usize) -> Result<Vec<f64>> {
    if k == 0 || k > ladder.scales() {
        return Err(invalid(format!("scale index {k} outside 1..={}", ladder.scales())));
    }
    if x.len() != points.dim() {
        return Err(invalid("reference point dimension does not match the design"));
    }
    let h = ladder.bandwidth(k);
    Ok(points
        .iter()
        .map(|t| ladder.kernel.weight(euclidean(t, x), h))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn boxcar_indicator() {
        let pts = Points::from_1d(&[-1.0, 0.0, 1.0]);
        let l = ScaleLadder::new(vec![0.5, 2.0], Kernel::Boxcar).unwrap();
        assert_eq!(build_weights(&l, &pts, &[0.0], 1).unwrap(), vec![0.0, 1.0, 0.0]);
        assert_eq!(build_weights(&l, &pts, &[0.0], 2).unwrap(), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn epanechnikov_matches_scalar_formula() {
        // independent scalar evaluation of max(0, 1 - (d/h)^2)
        let oracle = |d: f64, h: f64| {
            let s = d / h;
            if s * s < 1.0 {
                1.0 - s * s
            } else {
                0.0
            }
        };
        let k = Kernel::Epanechnikov;
        assert_eq!(k.weight(0.0, 0.7), 1.0);
        assert_eq!(k.weight(0.7, 0.7), 0.0);
        for &d in &[0.1, 0.35, 0.69, 1.2] {
            assert!((k.weight(d, 0.7) - oracle(d, 0.7)).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_non_increasing_bandwidths() {
        assert!(ScaleLadder::new(vec![1.0, 1.0], Kernel::Boxcar).is_err());
        assert!(ScaleLadder::new(vec![], Kernel::Boxcar).is_err());
        assert!(ScaleLadder::geometric(0.1, 1.0, 3, Kernel::Boxcar).is_err());
    }

    #[test]
    fn out_of_range_scale() {
        let pts = Points::from_1d(&[0.0]);
        let l = ScaleLadder::geometric(0.1, 1.5, 3, Kernel::Boxcar).unwrap();
        assert!(build_weights(&l, &pts, &[0.0], 0).is_err());
        assert!(build_weights(&l, &pts, &[0.0], 4).is_err());
    }

    proptest! {
        #[test]
        fn weights_nested_and_bounded(
            pts in proptest::collection::vec(-3.0f64..3.0, 1..30),
            x in -2.0f64..2.0,
            h1 in 0.05f64..1.0,
            growth in 1.05f64..2.0,
            kernel in prop_oneof![Just(Kernel::Boxcar), Just(Kernel::Epanechnikov), Just(Kernel::TruncatedGaussian)],
        ) {
            let points = Points::from_1d(&pts);
            let ladder = ScaleLadder::geometric(h1, growth, 5, kernel).unwrap();
            let mut prev = vec![0.0; pts.len()];
            for k in 1..=5 {
                let w = build_weights(&ladder, &points, &[x], k).unwrap();
                for (a, b) in prev.iter().zip(&w) {
                    prop_assert!(*b >= 0.0 && *b <= 1.0);
                    prop_assert!(*b >= *a);
                }
                if kernel == Kernel::Boxcar {
                    for (a, b) in prev.iter().zip(&w) {
                        prop_assert_eq!(a * b, *a);
                    }
                }
                prev = w;
            }
        }
    }
}
