use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SystemSpec;
use crate::rng;

use super::grid::{Axis, CellCoefficients, PhaseGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoefficientPreset {
    /// Random rotations of eigenvalues `Λ^u`, `u` uniform in `[-1, 1]`.
    Rough,
    /// `Λ^{-1} Id` and `Λ Id` alternating with the parity of the lattice index.
    Checkerboard,
    Identity,
}

/// Piecewise-constant symmetric matrix field on a coarse lattice over phase space.
///
/// The field is a function of position, independent of any grid it is later sampled on,
/// so refining the solver grid keeps the same coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientField {
    lattice: PhaseGrid,
    d0: usize,
    matrices: Vec<DMatrix<f64>>,
    lambda: f64,
}

impl CoefficientField {
    pub fn lattice(&self) -> &PhaseGrid {
        &self.lattice
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    /// Matrix at an internal-order point; points outside the lattice box use the nearest cell.
    pub fn at(&self, x: &[f64]) -> &DMatrix<f64> {
        let idx: Vec<usize> = self
            .lattice
            .axes()
            .iter()
            .zip(x)
            .map(|(a, &xi)| (((xi - a.lo) / a.h()).floor().max(0.0) as usize).min(a.n - 1))
            .collect();
        &self.matrices[self.lattice.linear_index(&idx)]
    }

    /// Values at the cell centres of `grid`.
    pub fn on_grid(&self, grid: &PhaseGrid) -> CellCoefficients {
        let mut data = Vec::with_capacity(grid.len() * self.d0 * self.d0);
        for c in 0..grid.len() {
            let m = self.at(&grid.center(c));
            for a in 0..self.d0 {
                for b in 0..self.d0 {
                    data.push(m[(a, b)]);
                }
            }
        }
        CellCoefficients::from_data(self.d0, data).expect("square blocks")
    }

    /// Extreme eigenvalues over the lattice.
    pub fn eigen_range(&self) -> (f64, f64) {
        self.matrices
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| {
                let ev = m.symmetric_eigenvalues();
                (lo.min(ev.min()), hi.max(ev.max()))
            })
    }
}

/// Coarse lattice with `cells[i]` cells per axis of layer `i` over `[-half[i], half[i]]`.
pub fn lattice(spec: &SystemSpec, half: &[f64], cells: &[usize]) -> Result<PhaseGrid> {
    PhaseGrid::layered(spec, half, cells)
}

/// Sample a coefficient field on `lattice` with ellipticity `Λ = spec.lambda()`.
pub fn rough_coefficient_sampler(
    spec: &SystemSpec,
    lattice: &PhaseGrid,
    preset: CoefficientPreset,
    seed: u64,
) -> Result<CoefficientField> {
    let lambda = spec.lambda();
    if !(lambda >= 1.0) {
        return Err(Error::InvalidParameters(format!(
            "lambda = {lambda} must be >= 1"
        )));
    }
    if lattice.dim() != spec.n() {
        return Err(Error::DimensionMismatch {
            expected: spec.n(),
            got: lattice.dim(),
        });
    }
    let d0 = spec.d0();
    let mut r = rng::stream(seed, "rough-coefficient");
    let matrices = (0..lattice.len())
        .map(|c| match preset {
            CoefficientPreset::Identity => DMatrix::identity(d0, d0),
            _ if lambda == 1.0 => DMatrix::identity(d0, d0),
            CoefficientPreset::Checkerboard => {
                let parity: usize = lattice.multi_index(c).iter().sum();
                let a = if parity.is_multiple_of(2) {
                    1.0 / lambda
                } else {
                    lambda
                };
                DMatrix::identity(d0, d0) * a
            }
            CoefficientPreset::Rough => {
                let q = random_rotation(&mut r, d0);
                let eig = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(d0, |_, _| {
                    lambda.powf(r.random_range(-1.0..=1.0))
                }));
                let m = &q * eig * q.transpose();
                // symmetrize away rounding
                (&m + m.transpose()) * 0.5
            }
        })
        .collect();
    Ok(CoefficientField {
        lattice: lattice.clone(),
        d0,
        matrices,
        lambda,
    })
}

/// Haar-distributed orthogonal matrix from the QR factorization of a Gaussian matrix.
fn random_rotation<R: Rng>(r: &mut R, d: usize) -> DMatrix<f64> {
    if d == 1 {
        return DMatrix::identity(1, 1);
    }
    let g = DMatrix::from_fn(d, d, |_, _| r.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let rr = qr.r();
    for j in 0..d {
        if rr[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Lattice matching a solver box: per-layer half-widths and the number of lattice cells per axis.
pub fn lattice_for(grid: &PhaseGrid, cells_per_axis: &[usize]) -> Result<PhaseGrid> {
    let axes = grid
        .axes()
        .iter()
        .zip(cells_per_axis)
        .map(|(a, &n)| Axis::new(a.lo, a.hi, n))
        .collect::<Result<Vec<_>>>()?;
    if axes.len() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: axes.len(),
        });
    }
    Ok(PhaseGrid::from_axes(axes))
}
