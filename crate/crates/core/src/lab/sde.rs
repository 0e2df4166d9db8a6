use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{KineticPoint, SystemSpec};
use crate::rng;

use super::grid::{GridField, PhaseGrid};

/// Paths are simulated in blocks of this many, each block on its own random stream.
pub const BLOCK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SdeScheme {
    /// `X^(i)` advances with the previous step's `X^(i-1)`.
    EulerMaruyama,
    /// `X^(i)` advances with the average of `X^(i-1)` before and after the step; layers are updated bottom-up.
    #[default]
    Trapezoidal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdeConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    #[serde(default)]
    pub scheme: SdeScheme,
    /// Times at which all states are stored besides the terminal one.
    #[serde(default)]
    pub record: Vec<f64>,
}

/// Simulated states in internal coordinate order, row-major `n_paths × N`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathEnsemble {
    pub n_paths: usize,
    pub dt: f64,
    pub steps: usize,
    pub seed: u64,
    pub start: KineticPoint,
    pub dims: Vec<usize>,
    pub terminal_time: f64,
    pub terminal: Vec<f64>,
    pub intermediate: Vec<(f64, Vec<f64>)>,
}

impl PathEnsemble {
    pub fn n(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn state(&self, path: usize) -> &[f64] {
        let n = self.n();
        &self.terminal[path * n..(path + 1) * n]
    }

    /// Sample mean and covariance of the terminal states over the first `n_paths` paths.
    pub fn moments(&self, n_paths: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = self.n();
        let m = n_paths.min(self.n_paths);
        let mut mean = vec![0.0; n];
        for p in 0..m {
            for (k, x) in self.state(p).iter().enumerate() {
                mean[k] += x;
            }
        }
        mean.iter_mut().for_each(|x| *x /= m as f64);
        let mut cov = vec![vec![0.0; n]; n];
        for p in 0..m {
            let s = self.state(p);
            for a in 0..n {
                for b in 0..n {
                    cov[a][b] += (s[a] - mean[a]) * (s[b] - mean[b]);
                }
            }
        }
        let denom = (m.max(2) - 1) as f64;
        cov.iter_mut().flatten().for_each(|x| *x /= denom);
        (mean, cov)
    }
}

/// Paths of `dV = dW`, `dX^(i) = B_i X^(i-1) dt` started at `start`.
pub fn sde_simulate(
    spec: &SystemSpec,
    start: &KineticPoint,
    cfg: &SdeConfig,
) -> Result<PathEnsemble> {
    if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
        return Err(Error::InvalidParameters(format!(
            "dt = {} must be positive",
            cfg.dt
        )));
    }
    if !(cfg.horizon >= 0.0 && cfg.horizon.is_finite()) {
        return Err(Error::InvalidParameters(format!(
            "horizon = {} must be non-negative",
            cfg.horizon
        )));
    }
    let steps = (cfg.horizon / cfg.dt).round() as usize;
    let dt = if steps == 0 {
        cfg.dt
    } else {
        cfg.horizon / steps as f64
    };
    let record_steps: Vec<usize> = cfg
        .record
        .iter()
        .map(|t| ((t - start.t()) / dt).round().max(0.0) as usize)
        .collect();
    let n = spec.n();
    let x0: Vec<f64> = start.flat().iter().copied().collect();
    let blocks = cfg.n_paths.div_ceil(BLOCK);
    let results: Vec<(Vec<f64>, Vec<Vec<f64>>)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let count = BLOCK.min(cfg.n_paths - b * BLOCK);
            let mut r = rng::substream(cfg.seed, "sde-paths", b as u64);
            let mut terminal = Vec::with_capacity(count * n);
            let mut recorded = vec![Vec::with_capacity(count * n); record_steps.len()];
            let mut x = vec![0.0; n];
            let mut prev = vec![0.0; n];
            for _ in 0..count {
                x.copy_from_slice(&x0);
                for (slot, &rs) in recorded.iter_mut().zip(&record_steps) {
                    if rs == 0 {
                        slot.extend_from_slice(&x);
                    }
                }
                for step in 1..=steps {
                    advance(spec, cfg.scheme, dt, &mut r, &mut x, &mut prev);
                    for (slot, &rs) in recorded.iter_mut().zip(&record_steps) {
                        if rs == step {
                            slot.extend_from_slice(&x);
                        }
                    }
                }
                terminal.extend_from_slice(&x);
            }
            (terminal, recorded)
        })
        .collect();
    let mut terminal = Vec::with_capacity(cfg.n_paths * n);
    let mut recorded = vec![Vec::with_capacity(cfg.n_paths * n); record_steps.len()];
    for (t, rec) in results {
        terminal.extend(t);
        for (slot, part) in recorded.iter_mut().zip(rec) {
            slot.extend(part);
        }
    }
    let intermediate = record_steps
        .iter()
        .map(|&s| start.t() + s as f64 * dt)
        .zip(recorded)
        .collect();
    Ok(PathEnsemble {
        n_paths: cfg.n_paths,
        dt,
        steps,
        seed: cfg.seed,
        start: start.clone(),
        dims: spec.dims().to_vec(),
        terminal_time: start.t() + steps as f64 * dt,
        terminal,
        intermediate,
    })
}

fn advance<R: Rng>(
    spec: &SystemSpec,
    scheme: SdeScheme,
    dt: f64,
    r: &mut R,
    x: &mut [f64],
    prev: &mut [f64],
) {
    prev.copy_from_slice(x);
    let sq = dt.sqrt();
    for v in x.iter_mut().take(spec.d0()) {
        *v += sq * r.sample::<f64, _>(StandardNormal);
    }
    for i in 1..=spec.kappa() {
        let b = spec.block(i);
        let (lo, off) = (spec.offset(i - 1), spec.offset(i));
        for row in 0..spec.dims()[i] {
            let mut drift = 0.0;
            for q in 0..spec.dims()[i - 1] {
                let below = match scheme {
                    SdeScheme::EulerMaruyama => prev[lo + q],
                    SdeScheme::Trapezoidal => 0.5 * (prev[lo + q] + x[lo + q]),
                };
                drift += b[(row, q)] * below;
            }
            x[off + row] += dt * drift;
        }
    }
}

/// Histogram of the first `n_paths` terminal states, normalised by `n_paths` and the cell volume.
/// Paths outside the grid count towards the normalisation only.
pub fn empirical_density(
    spec: &SystemSpec,
    ensemble: &PathEnsemble,
    grid: &PhaseGrid,
    n_paths: usize,
) -> Result<GridField> {
    let m = n_paths.min(ensemble.n_paths);
    if m == 0 {
        return Err(Error::InvalidParameters(
            "empirical density needs at least one path".into(),
        ));
    }
    let mut counts = vec![0.0; grid.len()];
    for p in 0..m {
        if let Some(c) = grid.locate(ensemble.state(p)) {
            counts[c] += 1.0;
        }
    }
    let scale = 1.0 / (m as f64 * grid.cell_volume());
    counts.iter_mut().for_each(|c| *c *= scale);
    GridField::new(
        spec,
        grid.clone(),
        vec![ensemble.terminal_time],
        ensemble.dt.max(f64::MIN_POSITIVE),
        vec![counts],
    )
}

/// `Σ |histogram - reference| · vol` for each subset size in `ns`.
pub fn histogram_l1(
    spec: &SystemSpec,
    ensemble: &PathEnsemble,
    grid: &PhaseGrid,
    reference: &[f64],
    ns: &[usize],
) -> Result<Vec<f64>> {
    if reference.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: reference.len(),
        });
    }
    ns.iter()
        .map(|&n| {
            let h = empirical_density(spec, ensemble, grid, n)?;
            Ok(h.values[0]
                .iter()
                .zip(reference)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                * grid.cell_volume())
        })
        .collect()
}
