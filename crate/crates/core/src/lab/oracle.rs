use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::SystemSpec;

use super::grid::{CellCoefficients, PhaseGrid};
use super::kernel::Gaussian;
use super::solver::{fd_solve, Boundary, BoundaryPolicy, FdConfig};

/// Gaussian initial bump evolved with `A = Id` and compared to the exact Gaussian it becomes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianBumpProblem {
    /// Half-width of the box per layer.
    pub half: Vec<f64>,
    /// Cells per axis, per layer.
    pub cells: Vec<usize>,
    /// Initial standard deviation per layer.
    pub sigma: Vec<f64>,
    pub steps: usize,
    pub horizon: f64,
}

impl GaussianBumpProblem {
    /// `κ = 1`, `d = 1` reference configuration on a `64 × 64` grid with 200 steps over unit time.
    pub fn reference() -> Self {
        Self {
            half: vec![4.5, 6.0],
            cells: vec![64, 64],
            sigma: vec![0.5, 1.5],
            steps: 200,
            horizon: 1.0,
        }
    }

    /// Every mesh size halved; the time step is quartered to stay inside the diffusive limit.
    pub fn refined(&self) -> Self {
        Self {
            cells: self.cells.iter().map(|n| 2 * n).collect(),
            steps: 4 * self.steps,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    /// `Σ|f_h - f| / Σ|f|` over cell centres at the final time.
    pub relative_l1: f64,
    pub cfl_number: f64,
    pub shape: Vec<usize>,
    pub steps: usize,
}

pub fn gaussian_bump_error(
    spec: &SystemSpec,
    problem: &GaussianBumpProblem,
) -> Result<OracleReport> {
    let grid = PhaseGrid::layered(spec, &problem.half, &problem.cells)?;
    let start = Gaussian::layered(spec, DVector::zeros(spec.n()), &problem.sigma)?;
    let initial: Vec<f64> = (0..grid.len())
        .map(|c| start.density(&grid.center(c)))
        .collect();
    let cfg = FdConfig {
        dt: problem.horizon / problem.steps as f64,
        steps: problem.steps,
        t_start: 0.0,
        record_every: problem.steps,
        boundary: BoundaryPolicy::uniform(spec, Boundary::DirichletZero),
    };
    let coefficient = CellCoefficients::identity(spec.d0(), grid.len());
    let run = fd_solve(spec, &grid, &coefficient, None, &initial, &cfg)?;
    let exact = start.evolve(spec, problem.horizon, 1.0)?;
    let last = run.field.values.last().expect("final snapshot");
    let (mut num, mut den) = (0.0, 0.0);
    for (c, v) in last.iter().enumerate() {
        let e = exact.density(&grid.center(c));
        num += (v - e).abs();
        den += e.abs();
    }
    Ok(OracleReport {
        relative_l1: num / den,
        cfl_number: run.info.cfl_number,
        shape: run.info.shape,
        steps: problem.steps,
    })
}
