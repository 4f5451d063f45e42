use serde::{Deserialize, Serialize};

/// Regression functions of the first coordinate used by the scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    Constant { value: f64 },
    Linear { intercept: f64, slope: f64 },
    /// `sum_j coefs[j] t^j`.
    Polynomial { coefs: Vec<f64> },
    /// `amplitude * sin(2 pi frequency t)`.
    Sine { amplitude: f64, frequency: f64 },
    /// `amplitude * exp(-((t - center) / width)^2)`.
    Bump { amplitude: f64, center: f64, width: f64 },
    /// `slope * |t - at|`.
    Kink { at: f64, slope: f64 },
    /// `low` for `t < at`, `high` otherwise.
    Step { at: f64, low: f64, high: f64 },
}

impl TestFunction {
    pub fn value(&self, t: &[f64]) -> f64 {
        self.derivative(t[0], 0)
    }

    /// `j`-th derivative in the first coordinate. Discontinuity points of the
    /// step and kink take their right-hand limits.
    pub fn derivative(&self, t: f64, j: usize) -> f64 {
        match self {
            TestFunction::Constant { value } => if j == 0 { *value } else { 0.0 },
            TestFunction::Linear { intercept, slope } => match j {
                0 => intercept + slope * t,
                1 => *slope,
                _ => 0.0,
            },
            TestFunction::Polynomial { coefs } => {
                let mut acc = 0.0;
                for (i, c) in coefs.iter().enumerate().skip(j) {
                    let falling: f64 = (i - j + 1..=i).map(|v| v as f64).product();
                    acc += c * falling * t.powi((i - j) as i32);
                }
                acc
            }
            TestFunction::Sine { amplitude, frequency } => {
                let w = 2.0 * std::f64::consts::PI * frequency;
                amplitude * w.powi(j as i32) * (w * t + j as f64 * std::f64::consts::FRAC_PI_2).sin()
            }
            TestFunction::Bump { amplitude, center, width } => {
                // d^j/dt^j exp(-s^2) = (-1)^j H_j(s) exp(-s^2) / width^j
                let s = (t - center) / width;
                let (mut h0, mut h1) = (1.0, 2.0 * s);
                let hj = match j {
                    0 => h0,
                    _ => {
                        for m in 1..j {
                            let next = 2.0 * s * h1 - 2.0 * m as f64 * h0;
                            h0 = h1;
                            h1 = next;
                        }
                        h1
                    }
                };
                let sign = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
                amplitude * sign * hj * (-s * s).exp() / width.powi(j as i32)
            }
            TestFunction::Kink { at, slope } => match j {
                0 => slope * (t - at).abs(),
                1 => if t >= *at { *slope } else { -slope },
                _ => 0.0,
            },
            TestFunction::Step { at, low, high } => match j {
                0 => if t < *at { *low } else { *high },
                _ => 0.0,
            },
        }
    }

    /// Coefficients of the scaled-monomial basis at `x`: for exponent vector
    /// `a`, the partial derivative `d^a f(x)`. Only the first coordinate matters.
    pub fn taylor(&self, x: &[f64], exponents: &[Vec<u32>]) -> Vec<f64> {
        exponents
            .iter()
            .map(|a| {
                if a.iter().skip(1).any(|e| *e != 0) {
                    0.0
                } else {
                    self.derivative(x[0], a[0] as usize)
                }
            })
            .collect()
    }
}
