//! Both sides of the Poincaré inequality on grid solutions, and ensemble estimates of the ratio.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::ControlBasis;
use crate::error::{Error, Result};
use crate::geometry::{Cylinder, CylinderLayout, SystemSpec};
use crate::lab::coefficient::{lattice_for, rough_coefficient_sampler, CoefficientPreset};
use crate::lab::grid::{in_balls, GridField, PhaseGrid};
use crate::lab::solver::{fd_solve, stable_dt, BoundaryPolicy, FdConfig, SchemeInfo};
use crate::rng;
use crate::trajectory::bounding_radius;

/// Ratios are recorded only when the right-hand side exceeds this.
pub const RHS_FLOOR: f64 = 1e-14;

/// Ambient domain `{|x^(i)| < radii[i]} × (t_lo, t_hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ambient {
    pub radii: Vec<f64>,
    pub time: (f64, f64),
}

impl Ambient {
    pub fn new(spec: &SystemSpec, radii: Vec<f64>, time: (f64, f64)) -> Result<Self> {
        if radii.len() != spec.kappa() + 1 {
            return Err(Error::DimensionMismatch {
                expected: spec.kappa() + 1,
                got: radii.len(),
            });
        }
        if radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) || !(time.0 < time.1) {
            return Err(Error::Geometry(format!(
                "bad ambient domain {radii:?} x ({}, {}]",
                time.0, time.1
            )));
        }
        Ok(Self { radii, time })
    }

    /// Per-layer maxima of the connecting trajectories, rounded up to whole units, over the
    /// time span of the layout.
    pub fn from_trajectories(
        spec: &SystemSpec,
        basis: &ControlBasis,
        layout: &CylinderLayout,
        n_samples: usize,
        seed: u64,
    ) -> Result<Self> {
        let br = bounding_radius(spec, basis, layout, n_samples, seed)?;
        let radii = br.layer_max.iter().map(|r| r.ceil().max(1.0)).collect();
        Self::new(spec, radii, layout.time_span(spec))
    }

    pub fn contains(&self, spec: &SystemSpec, x: &[f64], t: f64) -> bool {
        t > self.time.0 && t <= self.time.1 && in_balls(spec, x, &self.radii)
    }
}

fn cells_checked(field: &GridField, cyl: &Cylinder, name: &str) -> Result<Vec<(usize, usize)>> {
    if !field.contains_cylinder(cyl) {
        return Err(Error::Geometry(format!(
            "{name} is not contained in the field box"
        )));
    }
    let cells = field.cells_in(cyl);
    if cells.is_empty() {
        return Err(Error::Geometry(format!("no cell centre lies in {name}")));
    }
    Ok(cells)
}

/// Cell-weighted mean over `(snapshot, cell)` pairs. The first value is subtracted before summing,
/// so a constant field averages to itself exactly.
fn mean_over(field: &GridField, cells: &[(usize, usize)]) -> f64 {
    let (k0, c0) = cells[0];
    let reference = field.values[k0][c0];
    let shift: f64 = cells
        .iter()
        .map(|&(k, c)| field.values[k][c] - reference)
        .sum();
    reference + shift / cells.len() as f64
}

/// `⟨f⟩_{Q^-}`: mean of `f` over the cells whose centres lie in `q_minus`.
pub fn past_average(field: &GridField, q_minus: &Cylinder) -> Result<f64> {
    let cells = cells_checked(field, q_minus, "the past cylinder")?;
    Ok(mean_over(field, &cells))
}

/// `∫_{Q^+} (f - ⟨f⟩_{Q^-})_+^p` by the midpoint rule.
pub fn lhs_poincare(
    field: &GridField,
    q_plus: &Cylinder,
    q_minus: &Cylinder,
    p: f64,
) -> Result<f64> {
    check_p(p)?;
    let avg = past_average(field, q_minus)?;
    let cells = cells_checked(field, q_plus, "the future cylinder")?;
    let measure = field.grid.cell_volume() * field.tau;
    let sum: f64 = cells
        .iter()
        .map(|&(k, c)| (field.values[k][c] - avg).max(0.0).powf(p))
        .sum();
    Ok(sum * measure)
}

/// `∫_Ω |√A ∇_v f|^p` by the midpoint rule with centred velocity differences
/// (one-sided at the edge of the grid), plus `∫_Ω |S|^p` when a source is attached.
pub fn rhs_poincare(field: &GridField, ambient: &Ambient, p: f64) -> Result<f64> {
    check_p(p)?;
    let spec = &field.spec;
    let grid = &field.grid;
    for i in 0..=spec.kappa() {
        for k in spec.offset(i)..spec.offset(i) + spec.dims()[i] {
            let a = grid.axes()[k];
            if ambient.radii[i] > -a.lo + 1e-12 || ambient.radii[i] > a.hi + 1e-12 {
                return Err(Error::Geometry(
                    "the ambient domain is not contained in the field box".into(),
                ));
            }
        }
    }
    let (b_lo, b_hi) = field.time_box();
    if ambient.time.0 < b_lo - 1e-12 || ambient.time.1 > b_hi + 1e-12 {
        return Err(Error::Geometry(
            "the ambient time window is not covered by the field".into(),
        ));
    }
    let d0 = spec.d0();
    let root = field.coefficient.sqrt();
    let inside: Vec<usize> = (0..grid.len())
        .filter(|&c| in_balls(spec, &grid.center(c), &ambient.radii))
        .collect();
    let strides = grid.strides();
    let mut total = 0.0;
    let mut grad = vec![0.0; d0];
    for (k, &t) in field.times.iter().enumerate() {
        if !(t > ambient.time.0 && t <= ambient.time.1) {
            continue;
        }
        let f = &field.values[k];
        for &c in &inside {
            let idx = grid.multi_index(c);
            for (a, g) in grad.iter_mut().enumerate() {
                let ax = grid.axes()[a];
                let h = ax.h();
                let (lo, hi, span) = match (idx[a] > 0, idx[a] + 1 < ax.n) {
                    (true, true) => (c - strides[a], c + strides[a], 2.0 * h),
                    (false, true) => (c, c + strides[a], h),
                    (true, false) => (c - strides[a], c, h),
                    (false, false) => (c, c, 1.0),
                };
                *g = (f[hi] - f[lo]) / span;
            }
            let m = root.at(c);
            let norm2: f64 = (0..d0)
                .map(|a| {
                    let y: f64 = (0..d0).map(|b| m[a * d0 + b] * grad[b]).sum();
                    y * y
                })
                .sum();
            total += norm2.sqrt().powf(p);
            if let Some(s) = &field.source {
                total += s[c].abs().powf(p);
            }
        }
    }
    Ok(total * grid.cell_volume() * field.tau)
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameters(format!(
            "exponent p = {p} must be in [1, inf)"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CylinderDescriptor {
    pub radius: f64,
    pub time: (f64, f64),
}

impl From<(&SystemSpec, &Cylinder)> for CylinderDescriptor {
    fn from((spec, c): (&SystemSpec, &Cylinder)) -> Self {
        Self {
            radius: c.radius,
            time: c.actual_time_interval(spec),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeometryDescriptor {
    pub q_plus: CylinderDescriptor,
    pub q_minus: CylinderDescriptor,
    pub ambient: Ambient,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PoincareReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`, absent when `rhs <= RHS_FLOOR`.
    pub ratio: Option<f64>,
    pub p: f64,
    pub geometry: GeometryDescriptor,
    pub provenance: String,
}

pub fn poincare_report(
    field: &GridField,
    q_plus: &Cylinder,
    q_minus: &Cylinder,
    ambient: &Ambient,
    p: f64,
    provenance: impl Into<String>,
) -> Result<PoincareReport> {
    let lhs = lhs_poincare(field, q_plus, q_minus, p)?;
    let rhs = rhs_poincare(field, ambient, p)?;
    let ratio = (rhs > RHS_FLOOR).then(|| lhs / rhs);
    let spec = &field.spec;
    Ok(PoincareReport {
        lhs,
        rhs,
        ratio,
        p,
        geometry: GeometryDescriptor {
            q_plus: (spec, q_plus).into(),
            q_minus: (spec, q_minus).into(),
            ambient: ambient.clone(),
        },
        provenance: provenance.into(),
    })
}

/// Grid and run parameters for [`ensemble_estimate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_runs: usize,
    pub lambda: f64,
    #[serde(default = "default_p")]
    pub p: Vec<f64>,
    /// Grid cells per axis, per layer.
    pub cells: Vec<usize>,
    /// Coefficient lattice cells per axis, per layer. Kept fixed under refinement.
    pub lattice: Vec<usize>,
    /// Width of the time cells (snapshot spacing).
    #[serde(default = "default_time_cell")]
    pub time_cell: f64,
    /// Fraction of the stable step actually used.
    #[serde(default = "default_safety")]
    pub cfl_safety: f64,
    #[serde(default = "default_preset")]
    pub preset: CoefficientPreset,
    /// Runs with a ratio above this are flagged.
    #[serde(default)]
    pub ratio_ceiling: Option<f64>,
    /// Ambient radii per layer; estimated from trajectories when absent.
    #[serde(default)]
    pub ambient_radii: Option<Vec<f64>>,
    #[serde(default = "default_bumps")]
    pub bumps: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_p() -> Vec<f64> {
    vec![1.0]
}
fn default_time_cell() -> f64 {
    0.05
}
fn default_safety() -> f64 {
    0.9
}
fn default_preset() -> CoefficientPreset {
    CoefficientPreset::Rough
}
fn default_bumps() -> usize {
    2
}

impl EnsembleConfig {
    /// `κ = 1`, `d = 1` desk-scale configuration.
    pub fn desk(n_runs: usize, lambda: f64, seed: u64) -> Self {
        Self {
            n_runs,
            lambda,
            p: default_p(),
            cells: vec![40, 32],
            lattice: vec![10, 8],
            time_cell: default_time_cell(),
            cfl_safety: default_safety(),
            preset: default_preset(),
            ratio_ceiling: None,
            ambient_radii: None,
            bumps: default_bumps(),
            seed,
        }
    }

    /// Every mesh size halved; lattice and time cells unchanged.
    pub fn refined(&self) -> Self {
        Self {
            cells: self.cells.iter().map(|n| 2 * n).collect(),
            ..self.clone()
        }
    }
}

/// Per-run result; failed runs carry the error message.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunOutcome {
    pub run: usize,
    pub seed: u64,
    pub reports: Vec<PoincareReport>,
    pub scheme: Option<SchemeInfo>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PSummary {
    pub p: f64,
    pub max_ratio: Option<f64>,
    pub median_ratio: Option<f64>,
    /// Runs with no recorded ratio for this `p`.
    pub missing: usize,
    pub flagged: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub runs: Vec<RunOutcome>,
    pub failed: usize,
    pub per_p: Vec<PSummary>,
    pub ambient: Ambient,
    pub shape: Vec<usize>,
}

impl EnsembleSummary {
    pub fn max_ratio(&self, p: f64) -> Option<f64> {
        self.per_p
            .iter()
            .find(|s| s.p == p)
            .and_then(|s| s.max_ratio)
    }
}

/// Rough-coefficient runs of the solver through the layout's time span; one report per `p` per run.
pub fn ensemble_estimate(spec: &SystemSpec, cfg: &EnsembleConfig) -> Result<EnsembleSummary> {
    if spec.beta() != 1.0 {
        return Err(Error::Unsupported(format!(
            "Poincaré ensembles need the local case beta = 1, got {}",
            spec.beta()
        )));
    }
    if cfg.cells.len() != spec.kappa() + 1 || cfg.lattice.len() != spec.kappa() + 1 {
        return Err(Error::DimensionMismatch {
            expected: spec.kappa() + 1,
            got: cfg.cells.len(),
        });
    }
    if !(cfg.time_cell > 0.0) || !(cfg.cfl_safety > 0.0 && cfg.cfl_safety <= 1.0) || cfg.bumps == 0
    {
        return Err(Error::InvalidParameters(
            "need time_cell > 0, cfl_safety in (0, 1] and bumps >= 1".into(),
        ));
    }
    for &p in &cfg.p {
        check_p(p)?;
    }
    let spec = SystemSpec::new(
        spec.kappa(),
        1.0,
        spec.dims().to_vec(),
        spec.blocks().to_vec(),
        cfg.lambda,
    )?;
    let layout = CylinderLayout::standard(&spec);
    let ambient = match &cfg.ambient_radii {
        Some(r) => Ambient::new(&spec, r.clone(), layout.time_span(&spec))?,
        None => {
            let basis = ControlBasis::balanced(spec.kappa(), 1.0)?;
            Ambient::from_trajectories(
                &spec,
                &basis,
                &layout,
                2000,
                rng::child_seed(cfg.seed, "ambient", 0),
            )?
        }
    };
    let grid = PhaseGrid::layered(&spec, &ambient.radii, &cfg.cells)?;
    let per_axis_lattice: Vec<usize> = (0..=spec.kappa())
        .flat_map(|i| std::iter::repeat_n(cfg.lattice[i], spec.dims()[i]))
        .collect();
    let lattice = lattice_for(&grid, &per_axis_lattice)?;

    // snapshots at time-cell centres, none on the cylinder boundaries
    let tau = cfg.time_cell;
    let t_start = ambient.time.0 - 0.5 * tau;
    let n_cells = ((ambient.time.1 - ambient.time.0) / tau).round() as usize;

    let runs: Vec<RunOutcome> = (0..cfg.n_runs)
        .into_par_iter()
        .map(|run| {
            let seed = rng::child_seed(cfg.seed, "poincare-run", run as u64);
            match single_run(
                &spec, cfg, &grid, &lattice, &layout, &ambient, seed, t_start, tau, n_cells,
            ) {
                Ok((reports, scheme)) => RunOutcome {
                    run,
                    seed,
                    reports,
                    scheme: Some(scheme),
                    error: None,
                },
                Err(e) => RunOutcome {
                    run,
                    seed,
                    reports: vec![],
                    scheme: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let failed = runs.iter().filter(|r| r.error.is_some()).count();
    let per_p = cfg
        .p
        .iter()
        .enumerate()
        .map(|(j, &p)| {
            let mut ratios: Vec<(usize, f64)> = runs
                .iter()
                .filter_map(|r| {
                    r.reports
                        .get(j)
                        .and_then(|rep| rep.ratio)
                        .map(|x| (r.run, x))
                })
                .collect();
            let missing = runs.len() - ratios.len();
            let flagged = match cfg.ratio_ceiling {
                Some(ceil) => ratios
                    .iter()
                    .filter(|(_, x)| *x > ceil)
                    .map(|(r, _)| *r)
                    .collect(),
                None => vec![],
            };
            ratios.sort_by(|a, b| a.1.total_cmp(&b.1));
            let max_ratio = ratios.last().map(|x| x.1);
            let median_ratio = if ratios.is_empty() {
                None
            } else if ratios.len() % 2 == 1 {
                Some(ratios[ratios.len() / 2].1)
            } else {
                Some(0.5 * (ratios[ratios.len() / 2 - 1].1 + ratios[ratios.len() / 2].1))
            };
            PSummary {
                p,
                max_ratio,
                median_ratio,
                missing,
                flagged,
            }
        })
        .collect();
    Ok(EnsembleSummary {
        runs,
        failed,
        per_p,
        ambient,
        shape: grid.axes().iter().map(|a| a.n).collect(),
    })
}

#[allow(clippy::too_many_arguments)]
fn single_run(
    spec: &SystemSpec,
    cfg: &EnsembleConfig,
    grid: &PhaseGrid,
    lattice: &PhaseGrid,
    layout: &CylinderLayout,
    ambient: &Ambient,
    seed: u64,
    t_start: f64,
    tau: f64,
    n_cells: usize,
) -> Result<(Vec<PoincareReport>, SchemeInfo)> {
    let field = rough_coefficient_sampler(spec, lattice, cfg.preset, seed)?;
    let coefficient = field.on_grid(grid);
    let mut r = rng::stream(seed, "poincare-bump");
    let bumps: Vec<(Vec<f64>, f64, f64)> = (0..cfg.bumps)
        .map(|_| {
            // velocity centre outside the unit ball, so that mass diffuses into Q^+ after Q^-
            let mut center = Vec::with_capacity(spec.n());
            let dir = sample_direction(&mut r, spec.d0());
            let speed = r.random_range(1.5..3.0_f64).min(0.75 * ambient.radii[0]);
            center.extend(dir.iter().map(|u| u * speed));
            for i in 1..=spec.kappa() {
                for _ in 0..spec.dims()[i] {
                    center.push(r.random_range(-0.5..0.5) * ambient.radii[i]);
                }
            }
            (center, r.random_range(0.3..0.7), r.random_range(0.5..1.5))
        })
        .collect();
    let initial: Vec<f64> = (0..grid.len())
        .map(|c| {
            let x = grid.center(c);
            bumps
                .iter()
                .map(|(m, w, a)| {
                    let r2: f64 = x.iter().zip(m).map(|(p, q)| (p - q) * (p - q)).sum();
                    a * (-r2 / (2.0 * w * w)).exp()
                })
                .sum()
        })
        .collect();
    let limit = stable_dt(spec, grid, &coefficient);
    let sub = (tau / (cfg.cfl_safety * limit)).ceil().max(1.0) as usize;
    let fd = FdConfig {
        dt: tau / sub as f64,
        steps: sub * n_cells,
        t_start,
        record_every: sub,
        boundary: BoundaryPolicy::standard(spec),
    };
    let run = fd_solve(spec, grid, &coefficient, None, &initial, &fd)?;
    let provenance = format!("fd-solve seed={seed} preset={:?}", cfg.preset);
    let reports = cfg
        .p
        .iter()
        .map(|&p| {
            poincare_report(
                &run.field,
                &layout.plus,
                &layout.minus,
                ambient,
                p,
                provenance.clone(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((reports, run.info))
}

fn sample_direction<R: Rng>(r: &mut R, d: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d)
            .map(|_| r.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let n = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return g.iter().map(|x| x / n).collect();
        }
    }
}
