//! Concrete solutions of the local Kolmogorov equations: Gaussian kernels, an explicit
//! finite-difference solver with rough coefficients, and a Monte Carlo path simulator.

pub mod coefficient;
pub mod grid;
pub mod kernel;
pub mod oracle;
pub mod sde;
pub mod solver;

pub use coefficient::{rough_coefficient_sampler, CoefficientField, CoefficientPreset};
pub use grid::{Axis, CellCoefficients, GridField, PhaseGrid};
pub use kernel::{fundamental_solution, kernel, kernel_covariance, Gaussian, SDE_DIFFUSIVITY};
pub use oracle::{gaussian_bump_error, GaussianBumpProblem, OracleReport};
pub use sde::{empirical_density, histogram_l1, sde_simulate, PathEnsemble, SdeConfig, SdeScheme};
pub use solver::{fd_solve, stable_dt, Boundary, BoundaryPolicy, FdConfig, FdRun, SchemeInfo};

use crate::quadrature::legendre_rule;

/// Cell averages of `density` over `grid` by a tensor Gauss–Legendre rule with `order` points per axis.
pub fn cell_averages(
    grid: &PhaseGrid,
    order: usize,
    density: impl Fn(&[f64]) -> f64 + Sync,
) -> Vec<f64> {
    use rayon::prelude::*;
    let rule = legendre_rule(order);
    let dim = grid.dim();
    let total = order.pow(dim as u32);
    (0..grid.len())
        .into_par_iter()
        .map(|c| {
            let center = grid.center(c);
            let mut x = vec![0.0; dim];
            let mut acc = 0.0;
            for q in 0..total {
                let mut w = 1.0;
                let mut rem = q;
                for k in 0..dim {
                    let (node, weight) = rule[rem % order];
                    rem /= order;
                    x[k] = center[k] + 0.5 * grid.axes()[k].h() * node;
                    w *= 0.5 * weight;
                }
                acc += w * density(&x);
            }
            acc
        })
        .collect()
}
