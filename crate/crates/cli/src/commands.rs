use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hypokinetic::control::ControlBasis;
use hypokinetic::geometry::{KineticPoint, SystemSpec};
use hypokinetic::io::{self, csv_row, fmt_f64};
use hypokinetic::lab::coefficient::lattice_for;
use hypokinetic::lab::{
    fd_solve, gaussian_bump_error, rough_coefficient_sampler, sde_simulate, stable_dt, Boundary,
    BoundaryPolicy, CoefficientPreset, FdConfig, Gaussian, GaussianBumpProblem, PhaseGrid,
    SdeConfig, SdeScheme,
};
use hypokinetic::poincare::ensemble_estimate;
use hypokinetic::trajectory::TrajectoryBundle;
use hypokinetic::wronskian::determinant_check;
use hypokinetic::{Error, Result};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::Common;

/// Relative-error threshold of the determinant oracle.
const DET_TOLERANCE: f64 = 1e-9;

/// What a command produced; written into the manifest.
pub struct Run {
    pub command: &'static str,
    pub out_dir: PathBuf,
    pub config: serde_json::Value,
    pub outputs: Vec<PathBuf>,
    pub exit_code: i32,
    pub failure: Option<String>,
}

struct Writer {
    dir: PathBuf,
    outputs: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            outputs: vec![],
        })
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, body)?;
        self.outputs.push(PathBuf::from(name));
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.text(name, &(serde_json::to_string_pretty(value)? + "\n"))
    }
}

fn load_spec(path: &Path) -> Result<SystemSpec> {
    io::parse_spec(&std::fs::read_to_string(path)?)
}

fn basis(spec: &SystemSpec, common: &Common) -> Result<ControlBasis> {
    match &common.alphas {
        Some(text) => ControlBasis::new(
            spec.kappa(),
            spec.beta(),
            io::parse_alphas(text, spec.kappa())?,
        ),
        None => ControlBasis::balanced(spec.kappa(), spec.beta()),
    }
}

fn base_config(common: &Common) -> serde_json::Value {
    serde_json::json!({
        "spec": common.spec,
        "seed": common.seed,
        "out": common.out,
        "alphas": common.alphas,
    })
}

fn merge(mut base: serde_json::Value, extra: serde_json::Value) -> serde_json::Value {
    if let (Some(b), serde_json::Value::Object(e)) = (base.as_object_mut(), extra) {
        b.extend(e);
    }
    base
}

fn finish(command: &'static str, common: &Common, w: Writer, config: serde_json::Value) -> Run {
    Run {
        command,
        out_dir: common.out.clone(),
        config,
        outputs: w.outputs,
        exit_code: 0,
        failure: None,
    }
}

pub fn check_wronskian(common: &Common, trials: usize) -> Result<Run> {
    let spec = load_spec(&common.spec)?;
    let alphas = match &common.alphas {
        Some(text) => Some(io::parse_alphas(text, spec.kappa())?),
        None => None,
    };
    let report = determinant_check(&spec, alphas.as_deref(), trials, common.seed)?;
    let pass = report.max_relative_error <= DET_TOLERANCE;
    let mut w = Writer::new(&common.out)?;
    w.json(
        "check-wronskian.json",
        &serde_json::json!({ "report": report, "tolerance": DET_TOLERANCE, "pass": pass }),
    )?;
    let mut run = finish(
        "check-wronskian",
        common,
        w,
        merge(base_config(common), serde_json::json!({ "trials": trials })),
    );
    if !pass {
        let e = Error::CheckFailed(format!(
            "max relative error {:e} exceeds {DET_TOLERANCE:e}",
            report.max_relative_error
        ));
        run.exit_code = e.exit_code();
        run.failure = Some(e.to_string());
    }
    Ok(run)
}

#[derive(Serialize)]
struct TrajectoryDiagnostics {
    delta: f64,
    alphas: Vec<f64>,
    endpoint_residual: f64,
    pure_transport: bool,
    control_coefficients: Vec<f64>,
    max_abs_control_coefficient: f64,
    singularity_slope: Option<f64>,
    singularity_slope_note: Option<String>,
    /// Largest Euclidean norm of each layer along the sampled path, `x^(0)` first.
    layer_max_norms: Vec<f64>,
}

pub fn trajectory(common: &Common, endpoints: &Path, samples: usize) -> Result<Run> {
    let spec = load_spec(&common.spec)?;
    let basis = basis(&spec, common)?;
    let (z_end, z0) = io::parse_endpoints(&std::fs::read_to_string(endpoints)?, &spec)?;
    if samples < 2 {
        return Err(Error::InvalidParameters("need at least 2 samples".into()));
    }
    let tb = TrajectoryBundle::solve(&spec, &basis, &z_end, &z0)?;
    let mut csv = String::from("s,t");
    for i in 0..=spec.kappa() {
        for c in 0..spec.dims()[i] {
            let _ = write!(csv, ",x{i}_{c}");
        }
    }
    csv.push('\n');
    let mut layer_max = vec![0.0f64; spec.kappa() + 1];
    for q in 0..samples {
        let s = q as f64 / (samples - 1) as f64;
        let z = tb.eval(s)?;
        let mut row = vec![s, z.t()];
        row.extend(z.flat().iter());
        csv.push_str(&csv_row(&row));
        for (m, l) in layer_max.iter_mut().zip(z.layers()) {
            *m = m.max(l.norm());
        }
    }
    let m = tb.control_coefficients();
    let (slope, note) = match tb.singularity_slope() {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let diag = TrajectoryDiagnostics {
        delta: tb.delta(),
        alphas: basis.alphas().to_vec(),
        endpoint_residual: tb.endpoint_residual()?,
        pure_transport: tb.is_pure_transport(),
        max_abs_control_coefficient: m.amax(),
        control_coefficients: m.iter().copied().collect(),
        singularity_slope: slope,
        singularity_slope_note: note,
        layer_max_norms: layer_max,
    };
    let mut w = Writer::new(&common.out)?;
    w.text("trajectory.csv", &csv)?;
    w.json("trajectory.json", &diag)?;
    let cfg = merge(
        base_config(common),
        serde_json::json!({ "endpoints": endpoints, "samples": samples }),
    );
    Ok(finish("trajectory", common, w, cfg))
}

pub fn poincare(common: &Common, config: &Path) -> Result<Run> {
    let spec = load_spec(&common.spec)?;
    if spec.beta() != 1.0 {
        return Err(Error::Unsupported(format!(
            "Poincaré ensembles run only in the local case beta = 1 (spec has beta = {})",
            spec.beta()
        )));
    }
    let mut cfg = io::parse_ensemble_config(&std::fs::read_to_string(config)?)?;
    cfg.seed = common.seed;
    let summary = ensemble_estimate(&spec, &cfg)?;
    let mut w = Writer::new(&common.out)?;
    let shape = summary
        .shape
        .iter()
        .map(|n| n.to_string())
        .collect::<Vec<_>>()
        .join("x");
    let mut csv = String::from("run,seed,lambda,kappa,p,lhs,rhs,ratio,grid_shape,status\n");
    for run in &summary.runs {
        w.json(&format!("poincare/run-{:03}.json", run.run), run)?;
        if run.error.is_some() {
            for &p in &cfg.p {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},,,,{shape},failed",
                    run.run,
                    run.seed,
                    fmt_f64(cfg.lambda),
                    spec.kappa(),
                    fmt_f64(p)
                );
            }
            continue;
        }
        for rep in &run.reports {
            let ratio = rep.ratio.map(fmt_f64).unwrap_or_default();
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{ratio},{shape},ok",
                run.run,
                run.seed,
                fmt_f64(cfg.lambda),
                spec.kappa(),
                fmt_f64(rep.p),
                fmt_f64(rep.lhs),
                fmt_f64(rep.rhs)
            );
        }
    }
    w.text("poincare-summary.csv", &csv)?;
    w.json(
        "poincare-summary.json",
        &serde_json::json!({
            "failed": summary.failed,
            "per_p": summary.per_p,
            "ambient": summary.ambient,
            "shape": summary.shape,
        }),
    )?;
    let mut run = finish(
        "poincare",
        common,
        w,
        merge(base_config(common), serde_json::json!({ "ensemble": cfg })),
    );
    if summary.failed > 0 {
        run.exit_code = 1;
        run.failure = Some(format!(
            "{} of {} solver runs failed",
            summary.failed,
            summary.runs.len()
        ));
    }
    Ok(run)
}

/// Configuration of the `solve` command.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    /// Box half-width per layer.
    pub half: Vec<f64>,
    /// Cells per axis, per layer.
    pub cells: Vec<usize>,
    /// Initial Gaussian widths per layer.
    pub sigma: Vec<f64>,
    /// Initial centre in display order `x^(κ), …, x^(0)`; the origin when absent.
    #[serde(default)]
    pub center: Option<Vec<f64>>,
    pub horizon: f64,
    pub steps: usize,
    /// Snapshots written besides the final one; the final time alone when 0.
    #[serde(default)]
    pub snapshots: usize,
    #[serde(default)]
    pub boundary: Option<BoundaryPolicy>,
    #[serde(default = "identity_preset")]
    pub preset: CoefficientPreset,
    /// Coefficient lattice cells per axis, per layer.
    #[serde(default)]
    pub lattice: Option<Vec<usize>>,
}

fn identity_preset() -> CoefficientPreset {
    CoefficientPreset::Identity
}

impl SolveConfig {
    /// The Gaussian-bump oracle problem, with the all-Dirichlet boundary it is scored under.
    fn reference(spec: &SystemSpec) -> Self {
        let p = GaussianBumpProblem::reference();
        Self {
            half: p.half,
            cells: p.cells,
            sigma: p.sigma,
            center: None,
            horizon: p.horizon,
            steps: p.steps,
            snapshots: 0,
            boundary: Some(BoundaryPolicy::uniform(spec, Boundary::DirichletZero)),
            preset: CoefficientPreset::Identity,
            lattice: None,
        }
    }
}

pub fn solve(common: &Common, config: Option<&Path>) -> Result<Run> {
    let spec = load_spec(&common.spec)?;
    let cfg = match config {
        Some(p) => serde_json::from_str::<SolveConfig>(&std::fs::read_to_string(p)?)?,
        None => SolveConfig::reference(&spec),
    };
    let k1 = spec.kappa() + 1;
    if cfg.half.len() != k1 || cfg.cells.len() != k1 || cfg.sigma.len() != k1 {
        return Err(Error::InvalidParameters(format!(
            "half, cells and sigma need {k1} entries"
        )));
    }
    if cfg.steps == 0
        || cfg.cells.iter().any(|&n| n == 0 || n > 4096)
        || cfg.sigma.iter().any(|s| s.is_nan() || *s <= 0.0)
    {
        return Err(Error::InvalidParameters(
            "need steps >= 1, cells in 1..=4096 and positive sigma".into(),
        ));
    }
    let grid = PhaseGrid::layered(&spec, &cfg.half, &cfg.cells)?;
    let center = match &cfg.center {
        Some(c) => {
            let mut disp = c.clone();
            disp.push(0.0);
            KineticPoint::from_display(&spec, &disp)?.flat()
        }
        None => DVector::zeros(spec.n()),
    };
    let start = Gaussian::layered(&spec, center, &cfg.sigma)?;
    let initial: Vec<f64> = (0..grid.len())
        .map(|c| start.density(&grid.center(c)))
        .collect();
    let coefficient = match cfg.preset {
        CoefficientPreset::Identity => {
            hypokinetic::lab::CellCoefficients::identity(spec.d0(), grid.len())
        }
        preset => {
            let per_layer = cfg
                .lattice
                .clone()
                .unwrap_or_else(|| cfg.cells.iter().map(|n| (n / 4).max(1)).collect());
            if per_layer.len() != k1 {
                return Err(Error::InvalidParameters(format!(
                    "lattice needs {k1} entries"
                )));
            }
            let per_axis: Vec<usize> = (0..k1)
                .flat_map(|i| std::iter::repeat_n(per_layer[i], spec.dims()[i]))
                .collect();
            let lattice = lattice_for(&grid, &per_axis)?;
            rough_coefficient_sampler(
                &spec,
                &lattice,
                preset,
                hypokinetic::rng::child_seed(common.seed, "solve", 0),
            )?
            .on_grid(&grid)
        }
    };
    let every = cfg
        .steps
        .checked_div(cfg.snapshots)
        .map_or(cfg.steps, |e| e.max(1));
    let steps = cfg.steps.div_ceil(every) * every;
    let dt = cfg.horizon / cfg.steps as f64;
    let fd = FdConfig {
        dt,
        steps,
        t_start: 0.0,
        record_every: every,
        boundary: cfg
            .boundary
            .clone()
            .unwrap_or_else(|| BoundaryPolicy::standard(&spec)),
    };
    let run = fd_solve(&spec, &grid, &coefficient, None, &initial, &fd)?;
    let mut w = Writer::new(&common.out)?;
    let last = run.field.values.len() - 1;
    for k in 0..=last {
        if k == 0 && last > 0 && cfg.snapshots == 0 {
            continue;
        }
        let mut buf = Vec::new();
        run.field.write_csv(k, &mut buf)?;
        let name = if k == last {
            "solution.csv".to_string()
        } else {
            format!("snapshots/snapshot-{k:04}.csv")
        };
        w.text(&name, &String::from_utf8(buf).expect("CSV is ASCII"))?;
    }
    let f = &run.field.values[last];
    let dirichlet = BoundaryPolicy::uniform(&spec, Boundary::DirichletZero);
    let oracle = if cfg.preset == CoefficientPreset::Identity
        && cfg.center.is_none()
        && steps == cfg.steps
        && fd.boundary == dirichlet
    {
        let problem = GaussianBumpProblem {
            half: cfg.half.clone(),
            cells: cfg.cells.clone(),
            sigma: cfg.sigma.clone(),
            steps: cfg.steps,
            horizon: cfg.horizon,
        };
        gaussian_bump_error(&spec, &problem).ok()
    } else {
        None
    };
    w.json(
        "solve.json",
        &serde_json::json!({
            "scheme": run.info,
            "stable_dt": stable_dt(&spec, &grid, &coefficient),
            "mass_initial": run.field.mass(0),
            "mass_final": run.field.mass(last),
            "min": f.iter().copied().fold(f64::INFINITY, f64::min),
            "max": f.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            "oracle": oracle,
        }),
    )?;
    let config = merge(base_config(common), serde_json::json!({ "solve": cfg }));
    Ok(finish("solve", common, w, config))
}

pub fn simulate(
    common: &Common,
    paths: usize,
    horizon: f64,
    dt: f64,
    start: Option<&str>,
    scheme: SdeScheme,
) -> Result<Run> {
    let spec = load_spec(&common.spec)?;
    let z = match start {
        Some(text) => KineticPoint::from_display(&spec, &io::parse_floats(text)?)?,
        None => KineticPoint::origin(&spec),
    };
    let cfg = SdeConfig {
        n_paths: paths,
        dt,
        horizon,
        seed: common.seed,
        scheme,
        record: vec![],
    };
    let e = sde_simulate(&spec, &z, &cfg)?;
    let mut csv = String::new();
    let mut header = vec!["path".to_string()];
    for i in 0..=spec.kappa() {
        for c in 0..spec.dims()[i] {
            header.push(format!("x{i}_{c}"));
        }
    }
    csv.push_str(&header.join(","));
    csv.push('\n');
    for p in 0..e.n_paths {
        let _ = write!(csv, "{p},");
        csv.push_str(&csv_row(e.state(p)));
    }
    let (mean, cov) = e.moments(e.n_paths);
    let layers: Vec<serde_json::Value> = (0..=spec.kappa())
        .map(|i| {
            let r = spec.offset(i)..spec.offset(i) + spec.dims()[i];
            serde_json::json!({
                "layer": i,
                "mean": mean[r.clone()].to_vec(),
                "covariance": cov[r.clone()].iter().map(|row| row[r.clone()].to_vec()).collect::<Vec<_>>(),
            })
        })
        .collect();
    let mut w = Writer::new(&common.out)?;
    w.text("terminal.csv", &csv)?;
    w.json(
        "moments.json",
        &serde_json::json!({
            "n_paths": e.n_paths,
            "dt": e.dt,
            "steps": e.steps,
            "terminal_time": e.terminal_time,
            "mean": mean,
            "covariance": cov,
            "layers": layers,
        }),
    )?;
    let config = merge(
        base_config(common),
        serde_json::json!({ "paths": paths, "horizon": horizon, "dt": dt, "start": start, "scheme": scheme }),
    );
    Ok(finish("simulate", common, w, config))
}
