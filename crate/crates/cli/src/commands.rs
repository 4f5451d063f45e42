use std::path::{Path, PathBuf};

use log::info;
use lpa_core::calibration::{
    ladder_growth, mc_calibrate, theoretical_cv, theoretical_cv_best_mu, validate_pc, CriticalValues, PcReport,
};
use lpa_core::diagnostics::{lambda0, oracle_report, wilks_spectrum, OracleInputs, OracleReport};
use lpa_core::local_model::{Basis, LadderSpec, LocalProblem, ScaleLadder};
use lpa_core::selector::{fit_curve, PointFit};
use lpa_core::sim::{delta_sweep, risk_experiment, Scene, SceneSpec, SweepReport};
use lpa_core::Dataset;
use serde::{Deserialize, Serialize};

use crate::config::{check_domains, load_fit_config, read_json, resolve_ladder, CvMethod, FitConfig, Overrides};
use crate::error::{CliError, CliResult};
use crate::ingest::ingest_csv;
use crate::output::{csv_text, emit, fmt_f64, fmt_opt, json_with_provenance, Provenance};

fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Reads thresholds written by `calibrate` (the provenance field is ignored).
pub fn read_cv(path: &Path) -> CliResult<CriticalValues> {
    let mut v: serde_json::Value = read_json(path)?;
    if let serde_json::Value::Object(m) = &mut v {
        m.remove("provenance");
    }
    let cv: CriticalValues =
        serde_json::from_value(v).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    cv.validate()?;
    Ok(cv)
}

/// Dataset, resolved configuration and ladder for the data-driven commands.
pub struct Prepared {
    pub data: Dataset,
    pub config: FitConfig,
    pub ladder_spec: LadderSpec,
    pub ladder: ScaleLadder,
    pub basis: Basis,
    pub inputs: Vec<Vec<u8>>,
}

pub fn prepare(data: &Path, config: Option<&Path>, ov: &Overrides) -> CliResult<Prepared> {
    let mut inputs = vec![read_bytes(data)?];
    if let Some(c) = config {
        inputs.push(read_bytes(c)?);
    }
    let cfg = load_fit_config(config, ov)?;
    let raw = ingest_csv(data)?;
    let dataset = raw.into_dataset(cfg.delta)?;
    let xs: Vec<f64> = dataset.points.iter().map(|t| t[0]).collect();
    let range = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - xs.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(range > 0.0) {
        return Err(CliError::Config("design points must span a positive range".into()));
    }
    let ladder_spec = resolve_ladder(cfg.ladder.as_ref(), range, ov)?;
    let ladder = ladder_spec.build()?;
    let basis = cfg.basis.build(dataset.dim())?;
    Ok(Prepared { data: dataset, config: cfg, ladder_spec, ladder, basis, inputs })
}

/// Design point closest to the centre of the bounding box.
fn central_point(data: &Dataset) -> Vec<f64> {
    let d = data.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for t in data.points.iter() {
        for j in 0..d {
            lo[j] = lo[j].min(t[j]);
            hi[j] = hi[j].max(t[j]);
        }
    }
    let c: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let dist = |t: &[f64]| t.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    data.points
        .iter()
        .min_by(|a, b| dist(a).total_cmp(&dist(b)))
        .expect("dataset is nonempty")
        .to_vec()
}

fn calibrate_problem(problem: &LocalProblem, cfg: &FitConfig) -> CliResult<CriticalValues> {
    let cv = match cfg.method {
        CvMethod::MonteCarlo => mc_calibrate(problem, cfg.alpha, cfg.r, cfg.mc_size, cfg.seed)?,
        CvMethod::Theoretical => {
            let u = ladder_growth(problem)?;
            match cfg.mu {
                Some(mu) => theoretical_cv(problem.p(), cfg.r, problem.scales(), cfg.alpha, u, mu)?,
                None => theoretical_cv_best_mu(problem.p(), cfg.r, problem.scales(), cfg.alpha, u)?,
            }
        }
    };
    Ok(cv)
}

fn calibrate_prepared(prep: &Prepared) -> CliResult<CriticalValues> {
    let x = prep.config.calibration_point.clone().unwrap_or_else(|| central_point(&prep.data));
    let problem = LocalProblem::new(&prep.basis, &prep.ladder, &prep.data.points, &prep.data.noise.sigma_model, &x)?;
    if let Some((k, reason)) = problem.rejected() {
        return Err(CliError::Numeric(format!(
            "calibration point {x:?}: ladder truncated at scale {k} ({reason}); choose another point or ladder"
        )));
    }
    info!("calibrating at {x:?} with {} scales", problem.scales());
    calibrate_problem(&problem, &prep.config)
}

#[derive(Serialize)]
struct EffectiveFit<'a> {
    config: &'a FitConfig,
    ladder: &'a LadderSpec,
}

pub fn run_calibrate(data: &Path, config: Option<&Path>, out: Option<&Path>, ov: &Overrides) -> CliResult<()> {
    let prep = prepare(data, config, ov)?;
    let cv = calibrate_prepared(&prep)?;
    let inputs: Vec<&[u8]> = prep.inputs.iter().map(|v| v.as_slice()).collect();
    let prov = Provenance::new(&EffectiveFit { config: &prep.config, ladder: &prep.ladder_spec }, &inputs, cv.seed);
    emit(out, &json_with_provenance(&cv, &prov)?)
}

pub fn run_fit(
    data: &Path,
    config: Option<&Path>,
    cv_path: Option<&Path>,
    out: Option<&Path>,
    plot: Option<&Path>,
    ov: &Overrides,
) -> CliResult<()> {
    let mut prep = prepare(data, config, ov)?;
    let cv = match cv_path {
        Some(p) => {
            prep.inputs.push(read_bytes(p)?);
            read_cv(p)?
        }
        None => calibrate_prepared(&prep)?,
    };
    let k = prep.ladder.scales();
    if cv.k != k || cv.p != prep.basis.p() {
        return Err(CliError::Config(format!(
            "thresholds are for p = {}, K = {} but the model has p = {}, K = {k}",
            cv.p,
            cv.k,
            prep.basis.p()
        )));
    }
    let grid = prep
        .config
        .grid
        .clone()
        .unwrap_or_else(|| prep.data.points.iter().map(|t| t.to_vec()).collect());
    if grid.iter().any(|g| g.len() != prep.data.dim()) {
        return Err(CliError::Config("grid points have the wrong dimension".into()));
    }
    let fits = fit_curve(&prep.data, &grid, &prep.ladder, &prep.basis, &cv.z);
    let d = prep.data.dim();
    let p = prep.basis.p();
    let xnames: Vec<String> = if d == 1 { vec!["x".into()] } else { (1..=d).map(|j| format!("x{j}")).collect() };
    let mut header = xnames.clone();
    header.extend(["f_hat", "k_hat", "scales"].map(String::from));
    header.extend((1..=p).map(|j| format!("theta{j}")));
    header.push("diagnostic".into());
    let mut rows = Vec::new();
    let mut plot_rows = Vec::new();
    for f in &fits {
        let mut row: Vec<String> = f.x.iter().map(|v| fmt_f64(*v)).collect();
        let mut prow = row.clone();
        match &f.estimate {
            Some(e) => {
                row.push(fmt_f64(e.fitted));
                row.push(e.k_hat.to_string());
                row.push(f.scales.to_string());
                row.extend(e.theta_hat.iter().map(|v| fmt_f64(*v)));
                prow.push(fmt_f64(e.fitted));
                prow.push(e.k_hat.to_string());
            }
            None => {
                row.extend(std::iter::repeat_n(String::new(), 2));
                row.push(f.scales.to_string());
                row.extend(std::iter::repeat_n(String::new(), p));
                prow.extend(std::iter::repeat_n(String::new(), 2));
            }
        }
        row.push(point_diagnostic(f));
        rows.push(row);
        plot_rows.push(prow);
    }
    let inputs: Vec<&[u8]> = prep.inputs.iter().map(|v| v.as_slice()).collect();
    #[derive(Serialize)]
    struct Eff<'a> {
        config: &'a FitConfig,
        ladder: &'a LadderSpec,
        z: &'a [f64],
    }
    let prov = Provenance::new(&Eff { config: &prep.config, ladder: &prep.ladder_spec, z: &cv.z }, &inputs, cv.seed);
    emit(out, &csv_text(&prov, &header, &rows)?)?;
    if let Some(pp) = plot {
        let mut ph = xnames;
        ph.extend(["f_hat", "k_hat"].map(String::from));
        emit(Some(pp), &csv_text(&prov, &ph, &plot_rows)?)?;
    }
    let failed = fits.iter().filter(|f| f.estimate.is_none()).count();
    if failed > 0 {
        log::warn!("{failed} of {} grid points have no estimate; see the diagnostic column", fits.len());
    }
    Ok(())
}

/// Error message, or the first rejected test `T(l,m) > z_l` when selection stopped early.
fn point_diagnostic(f: &PointFit) -> String {
    if let Some(d) = &f.diagnostic {
        return d.clone();
    }
    match &f.trace {
        Some(t) => match t.first_violation {
            Some((l, m)) => format!("T({l},{m})={}>z{l}={}", fmt_f64(t.statistics.get(l, m)), fmt_f64(t.thresholds[l - 1])),
            None => String::new(),
        },
        None => String::new(),
    }
}

fn default_sim_mc() -> usize {
    20_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub deltas: Vec<f64>,
    pub ns: Vec<usize>,
}

/// Scene plus calibration and sweep settings for `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    #[serde(flatten)]
    pub scene: SceneSpec,
    #[serde(default = "default_sim_mc")]
    pub mc_size: usize,
    #[serde(default)]
    pub calibration_seed: Option<u64>,
    #[serde(default)]
    pub method: CvMethod,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

fn load_sim(config: &Path, ov: &Overrides) -> CliResult<(SimulateConfig, Vec<u8>)> {
    let bytes = read_bytes(config)?;
    let mut cfg: SimulateConfig = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Config(format!("{}: {e}", config.display())))?;
    let s = &mut cfg.scene;
    if let Some(a) = ov.alpha {
        s.alpha = a;
    }
    if let Some(r) = ov.r {
        s.r = r;
    }
    if let Some(m) = ov.mu {
        cfg.mu = Some(m);
    }
    if let Some(m) = ov.mc_size {
        cfg.mc_size = m;
    }
    if let Some(seed) = ov.seed {
        s.seed = seed;
    }
    if let Some(g) = &ov.grid {
        s.x = crate::config::parse_grid(g)?;
    }
    let range = match &s.design {
        lpa_core::sim::DesignSpec::Equidistant { lo, hi } => hi - lo,
        lpa_core::sim::DesignSpec::Explicit { .. } => 1.0,
    };
    s.ladder = resolve_ladder(Some(&s.ladder), range, ov)?;
    check_domains(s.alpha, s.r, cfg.mu)?;
    Ok((cfg, bytes))
}

fn scene_cv(scene: &Scene, cfg: &SimulateConfig, cv_path: Option<&Path>) -> CliResult<CriticalValues> {
    if let Some(p) = cv_path {
        return read_cv(p);
    }
    let x = scene
        .spec
        .x
        .first()
        .ok_or_else(|| CliError::Config("scene lists no reference points".into()))?;
    let problem = LocalProblem::new(&scene.basis, &scene.ladder, &scene.points, &scene.sigma_model, x)?;
    let fit_cfg = FitConfig {
        alpha: scene.spec.alpha,
        r: scene.spec.r,
        method: cfg.method,
        mu: cfg.mu,
        mc_size: cfg.mc_size,
        seed: cfg.calibration_seed.unwrap_or(scene.spec.seed ^ 0x5eed),
        ..FitConfig::default()
    };
    calibrate_problem(&problem, &fit_cfg)
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    scene: &'a SceneSpec,
    thresholds: &'a CriticalValues,
    replicates: usize,
    excluded: usize,
    points: &'a [lpa_core::sim::PointRisk],
    sweep: Option<SweepReport>,
}

pub fn run_simulate(config: &Path, cv_path: Option<&Path>, out: Option<&Path>, ov: &Overrides) -> CliResult<()> {
    let (cfg, bytes) = load_sim(config, ov)?;
    let scene = cfg.scene.resolve()?;
    scene.validate()?;
    let cv = scene_cv(&scene, &cfg, cv_path)?;
    info!("running {} replicates", scene.spec.replicates);
    let table = risk_experiment(&scene, &cv)?;
    let sweep = match &cfg.sweep {
        Some(s) => Some(delta_sweep(&scene.spec, &s.deltas, &s.ns, cfg.mc_size, cfg.calibration_seed.unwrap_or(1))?),
        None => None,
    };
    let mut inputs: Vec<Vec<u8>> = vec![bytes];
    if let Some(p) = cv_path {
        inputs.push(read_bytes(p)?);
    }
    let refs: Vec<&[u8]> = inputs.iter().map(|v| v.as_slice()).collect();
    let prov = Provenance::new(&cfg, &refs, Some(scene.spec.seed));
    let header: Vec<String> =
        ["scene", "k", "statistic", "estimate", "std_error", "replicates"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            vec![
                r.scene.clone(),
                fmt_opt(r.k),
                r.statistic.clone(),
                fmt_f64(r.estimate),
                fmt_f64(r.std_error),
                r.replicates.to_string(),
            ]
        })
        .collect();
    let report = SimulateReport {
        scene: &scene.spec,
        thresholds: &cv,
        replicates: table.replicates,
        excluded: table.excluded,
        points: &table.points,
        sweep,
    };
    let json = json_with_provenance(&report, &prov)?;
    match out {
        Some(p) => {
            emit(Some(p), &csv_text(&prov, &header, &rows)?)?;
            emit(Some(&json_path(p)), &json)?;
        }
        None => {
            emit(None, &csv_text(&prov, &header, &rows)?)?;
        }
    }
    Ok(())
}

/// `out.csv` -> `out.json`.
pub fn json_path(p: &Path) -> PathBuf {
    p.with_extension("json")
}

#[derive(Serialize)]
struct DataPointDiagnostics {
    x: Vec<f64>,
    scales: usize,
    truncated: Option<String>,
    u0: Option<f64>,
    u: Option<f64>,
    lambda0: Option<f64>,
    /// Eigenvalues of the sandwich matrix at the largest scale (needs `sigma_true`).
    wilks_spectrum: Option<Vec<f64>>,
    error: Option<String>,
}

#[derive(Serialize)]
struct DataDiagnostics {
    n: usize,
    d: usize,
    p: usize,
    declared_delta: f64,
    observed_delta: f64,
    variance_ratio_bound_holds: bool,
    homogeneous: bool,
    points: Vec<DataPointDiagnostics>,
}

#[derive(Serialize)]
struct SceneDiagnostics {
    declared_delta: f64,
    observed_delta: f64,
    variance_ratio_bound_holds: bool,
    thresholds: CriticalValues,
    pc: Option<PcReport>,
    reports: Vec<OracleReport>,
}

pub fn run_diagnose(
    data: Option<&Path>,
    config: Option<&Path>,
    cv_path: Option<&Path>,
    out: Option<&Path>,
    ov: &Overrides,
) -> CliResult<()> {
    match data {
        Some(d) => diagnose_data(d, config, out, ov),
        None => {
            let c = config.ok_or_else(|| CliError::Config("diagnose needs --data or a scene --config".into()))?;
            diagnose_scene(c, cv_path, out, ov)
        }
    }
}

fn diagnose_data(data: &Path, config: Option<&Path>, out: Option<&Path>, ov: &Overrides) -> CliResult<()> {
    let prep = prepare(data, config, ov)?;
    let ds = &prep.data;
    let grid = prep
        .config
        .grid
        .clone()
        .unwrap_or_else(|| vec![central_point(ds)]);
    let points = grid
        .iter()
        .map(|x| match LocalProblem::new(&prep.basis, &prep.ladder, &ds.points, &ds.noise.sigma_model, x) {
            Ok(prob) => {
                let growth = prob.growth_bounds();
                let wilks = ds
                    .noise
                    .sigma_true
                    .as_ref()
                    .and_then(|st| wilks_spectrum(&prob, prob.scales(), &prob.gather(st)).ok());
                DataPointDiagnostics {
                    x: x.clone(),
                    scales: prob.scales(),
                    truncated: prob.rejected().map(|(k, r)| format!("scale {k}: {r}")),
                    u0: growth.map(|g| g.0),
                    u: growth.map(|g| g.1),
                    lambda0: Some(lambda0(&prob, ds.len(), ds.dim())),
                    wilks_spectrum: wilks,
                    error: None,
                }
            }
            Err(e) => DataPointDiagnostics {
                x: x.clone(),
                scales: 0,
                truncated: None,
                u0: None,
                u: None,
                lambda0: None,
                wilks_spectrum: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let report = DataDiagnostics {
        n: ds.len(),
        d: ds.dim(),
        p: prep.basis.p(),
        declared_delta: ds.noise.delta,
        observed_delta: ds.noise.observed_delta(),
        variance_ratio_bound_holds: ds.noise.satisfies_declared_bound(),
        homogeneous: ds.noise.is_homogeneous(),
        points,
    };
    let inputs: Vec<&[u8]> = prep.inputs.iter().map(|v| v.as_slice()).collect();
    let prov = Provenance::new(&EffectiveFit { config: &prep.config, ladder: &prep.ladder_spec }, &inputs, None);
    emit(out, &json_with_provenance(&report, &prov)?)
}

fn diagnose_scene(config: &Path, cv_path: Option<&Path>, out: Option<&Path>, ov: &Overrides) -> CliResult<()> {
    let (cfg, bytes) = load_sim(config, ov)?;
    let scene = cfg.scene.resolve()?;
    let observed = lpa_core::local_model::observed_delta(&scene.sigma_model, &scene.sigma_true);
    let cv = scene_cv(&scene, &cfg, cv_path)?;
    let mut reports = Vec::new();
    let mut pc = None;
    for (i, x) in scene.spec.x.iter().enumerate() {
        let prob = LocalProblem::new(&scene.basis, &scene.ladder, &scene.points, &scene.sigma_model, x)?;
        let k = prob.scales();
        if cv.z.len() + 1 < k {
            return Err(CliError::Config(format!("{} thresholds for {k} scales", cv.z.len())));
        }
        if i == 0 {
            let seed = cfg.calibration_seed.unwrap_or(scene.spec.seed ^ 0x5eed).wrapping_add(1);
            pc = Some(validate_pc(&prob, &cv.z[..k - 1], scene.spec.alpha, scene.spec.r, cfg.mc_size, seed)?);
        }
        let theta_ref = scene.theta_ref(x);
        let st = prob.gather(&scene.sigma_true);
        let inputs = OracleInputs {
            problem: &prob,
            f_values: &scene.f_values,
            theta_ref: &theta_ref,
            sigma_true_active: &st,
            delta: scene.delta,
            homogeneous: scene.is_homogeneous(),
            budget: scene.spec.budget,
            budgets_j: None,
            r: scene.spec.r,
            alpha: scene.spec.alpha,
            z: &cv.z[..k - 1],
            c_j: 1.0,
            n: scene.points.len(),
            d: scene.points.dim(),
        };
        reports.push(oracle_report(&inputs)?);
    }
    let report = SceneDiagnostics {
        declared_delta: scene.delta,
        observed_delta: observed,
        variance_ratio_bound_holds: observed <= scene.delta + 1e-12,
        thresholds: cv,
        pc,
        reports,
    };
    let prov = Provenance::new(&cfg, &[&bytes], Some(scene.spec.seed));
    emit(out, &json_with_provenance(&report, &prov)?)
}
