use std::path::Path;

use lpa_core::local_model::{BasisSpec, Kernel, LadderSpec, DEFAULT_GROWTH};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Numeric overrides shared by the subcommands.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Overrides {
    pub alpha: Option<f64>,
    pub r: Option<f64>,
    pub scales: Option<usize>,
    pub growth: Option<f64>,
    pub mu: Option<f64>,
    pub mc_size: Option<usize>,
    pub seed: Option<u64>,
    pub grid: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvMethod {
    #[default]
    MonteCarlo,
    Theoretical,
}

fn default_alpha() -> f64 {
    1.0
}
fn default_r() -> f64 {
    0.5
}
fn default_mc() -> usize {
    10_000
}
fn default_seed() -> u64 {
    1
}

/// Settings for `calibrate`, `fit` and data diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default)]
    pub ladder: Option<LadderSpec>,
    #[serde(default)]
    pub basis: BasisSpec,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_r")]
    pub r: f64,
    #[serde(default)]
    pub method: CvMethod,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default = "default_mc")]
    pub mc_size: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Point whose local design is used for calibration; defaults to the
    /// design point nearest the centre of the bounding box.
    #[serde(default)]
    pub calibration_point: Option<Vec<f64>>,
    #[serde(default)]
    pub grid: Option<Vec<Vec<f64>>>,
    /// Declared misspecification level for data with a `sigma_true` column.
    #[serde(default)]
    pub delta: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Fit settings from an optional JSON file with the command-line overrides applied.
pub fn load_fit_config(path: Option<&Path>, ov: &Overrides) -> CliResult<FitConfig> {
    let mut cfg = match path {
        Some(p) => read_json(p)?,
        None => FitConfig::default(),
    };
    if let Some(a) = ov.alpha {
        cfg.alpha = a;
    }
    if let Some(r) = ov.r {
        cfg.r = r;
    }
    if let Some(mu) = ov.mu {
        cfg.mu = Some(mu);
    }
    if let Some(m) = ov.mc_size {
        cfg.mc_size = m;
    }
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    if let Some(g) = &ov.grid {
        cfg.grid = Some(parse_grid(g)?);
    }
    check_domains(cfg.alpha, cfg.r, cfg.mu)?;
    Ok(cfg)
}

pub fn check_domains(alpha: f64, r: f64, mu: Option<f64>) -> CliResult<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(CliError::Config(format!("--alpha must lie in (0, 1], got {alpha}")));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(CliError::Config(format!("--r must be positive, got {r}")));
    }
    if let Some(mu) = mu {
        if !(mu > 0.0 && mu < 0.25) {
            return Err(CliError::Config(format!("--mu must lie in (0, 1/4), got {mu}")));
        }
    }
    Ok(())
}

/// Applies `--K` and `--u` to a ladder, or builds the default ladder
/// `h_1 = range / 20`, growth 1.25, five scales.
pub fn resolve_ladder(ladder: Option<&LadderSpec>, range: f64, ov: &Overrides) -> CliResult<LadderSpec> {
    let mut spec = ladder.cloned().unwrap_or(LadderSpec {
        kernel: Kernel::Boxcar,
        bandwidths: None,
        h1: Some(range / 20.0),
        growth: Some(DEFAULT_GROWTH),
        scales: Some(5),
    });
    if ov.scales.is_some() || ov.growth.is_some() {
        if spec.bandwidths.is_some() {
            return Err(CliError::Config("--K and --u cannot be combined with explicit bandwidths".into()));
        }
        if let Some(k) = ov.scales {
            spec.scales = Some(k);
        }
        if let Some(u) = ov.growth {
            spec.growth = Some(u);
        }
    }
    Ok(spec)
}

/// `lo:hi:n` (inclusive, one dimension) or a comma-separated list of values.
pub fn parse_grid(text: &str) -> CliResult<Vec<Vec<f64>>> {
    let bad = || CliError::Config(format!("cannot parse grid '{text}' (use lo:hi:n or v1,v2,...)"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if n == 0 || !(hi >= lo) {
            return Err(bad());
        }
        if n == 1 {
            return Ok(vec![vec![lo]]);
        }
        return Ok((0..n)
            .map(|i| vec![lo + (hi - lo) * i as f64 / (n - 1) as f64])
            .collect());
    }
    text.split(',')
        .map(|v| v.trim().parse::<f64>().map(|x| vec![x]).map_err(|_| bad()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0:1:3").unwrap(), vec![vec![0.0], vec![0.5], vec![1.0]]);
        assert_eq!(parse_grid("0.25, 0.75").unwrap(), vec![vec![0.25], vec![0.75]]);
        assert!(parse_grid("1:0:3").is_err());
        assert!(parse_grid("a,b").is_err());
    }

    #[test]
    fn overrides_and_domains() {
        let ov = Overrides { alpha: Some(0.5), scales: Some(3), growth: Some(1.5), ..Default::default() };
        let cfg = load_fit_config(None, &ov).unwrap();
        assert_eq!(cfg.alpha, 0.5);
        let l = resolve_ladder(cfg.ladder.as_ref(), 2.0, &ov).unwrap();
        assert_eq!((l.h1, l.growth, l.scales), (Some(0.1), Some(1.5), Some(3)));
        let bad = Overrides { alpha: Some(1.5), ..Default::default() };
        assert!(matches!(load_fit_config(None, &bad), Err(CliError::Config(_))));
        let bad = Overrides { mu: Some(0.3), ..Default::default() };
        assert!(load_fit_config(None, &bad).is_err());
    }
}
