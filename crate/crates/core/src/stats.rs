use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Sample mean with its Monte-Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl MeanEstimate {
    /// Two-pass mean and `sd / sqrt(n)`, summed in slice order.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { mean: f64::NAN, std_error: f64::NAN, n };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Self { mean, std_error: 0.0, n };
        }
        let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
        let sd = (ss / (n - 1) as f64).sqrt();
        Self { mean, std_error: sd / (n as f64).sqrt(), n }
    }

    /// Mean of indicator samples, `SE = sqrt(q(1-q)/n)`.
    pub fn proportion(hits: usize, n: usize) -> Self {
        let q = hits as f64 / n as f64;
        Self { mean: q, std_error: (q * (1.0 - q) / n as f64).sqrt(), n }
    }

    pub fn relative_error(&self) -> f64 {
        if self.mean == 0.0 {
            0.0
        } else {
            self.std_error / self.mean.abs()
        }
    }
}

/// `P{chi2_p >= z}`.
pub fn chi_square_sf(p: usize, z: f64) -> f64 {
    if z <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(p as f64).expect("p >= 1").sf(z)
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}
