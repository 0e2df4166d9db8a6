use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Cylinder, KineticPoint, SystemSpec};

/// Uniform cell-centred axis on `[lo, hi]` with `n` cells.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo < hi && lo.is_finite() && hi.is_finite()) || n == 0 {
            return Err(Error::InvalidParameters(format!(
                "bad axis [{lo}, {hi}] with {n} cells"
            )));
        }
        Ok(Self { lo, hi, n })
    }

    /// Symmetric axis `[-half, half]`.
    pub fn symmetric(half: f64, n: usize) -> Result<Self> {
        Self::new(-half, half, n)
    }

    pub fn h(&self) -> f64 {
        (self.hi - self.lo) / self.n as f64
    }

    pub fn center(&self, k: usize) -> f64 {
        self.lo + (k as f64 + 0.5) * self.h()
    }

    /// Index of the cell containing `x`, if any. Cells are `[lo + kh, lo + (k+1)h)`.
    pub fn locate(&self, x: f64) -> Option<usize> {
        if !(x >= self.lo && x < self.hi) {
            return None;
        }
        Some((((x - self.lo) / self.h()) as usize).min(self.n - 1))
    }
}

/// Tensor grid over phase space, one axis per coordinate in internal order
/// `x^(0)_1, …, x^(0)_{d_0}, x^(1)_1, …`. The last axis varies fastest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseGrid {
    axes: Vec<Axis>,
    strides: Vec<usize>,
    len: usize,
}

impl PhaseGrid {
    pub fn new(spec: &SystemSpec, axes: Vec<Axis>) -> Result<Self> {
        if axes.len() != spec.n() {
            return Err(Error::DimensionMismatch {
                expected: spec.n(),
                got: axes.len(),
            });
        }
        Ok(Self::from_axes(axes))
    }

    pub(crate) fn from_axes(axes: Vec<Axis>) -> Self {
        let mut strides = vec![1; axes.len()];
        for k in (0..axes.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * axes[k + 1].n;
        }
        let len = axes.iter().map(|a| a.n).product();
        Self { axes, strides, len }
    }

    /// Layer `i` gets the symmetric box `[-half[i], half[i]]^{d_i}` with `cells[i]` cells per axis.
    pub fn layered(spec: &SystemSpec, half: &[f64], cells: &[usize]) -> Result<Self> {
        if half.len() != spec.kappa() + 1 || cells.len() != spec.kappa() + 1 {
            return Err(Error::DimensionMismatch {
                expected: spec.kappa() + 1,
                got: half.len().min(cells.len()),
            });
        }
        let mut axes = Vec::with_capacity(spec.n());
        for (i, &d) in spec.dims().iter().enumerate() {
            for _ in 0..d {
                axes.push(Axis::symmetric(half[i], cells[i])?);
            }
        }
        Self::new(spec, axes)
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }
    pub fn strides(&self) -> &[usize] {
        &self.strides
    }
    pub fn len(&self) -> usize {
        self.len
    }
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Axis::h).product()
    }

    pub fn multi_index(&self, cell: usize) -> Vec<usize> {
        self.axes
            .iter()
            .zip(&self.strides)
            .map(|(a, &s)| (cell / s) % a.n)
            .collect()
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn center(&self, cell: usize) -> Vec<f64> {
        self.axes
            .iter()
            .zip(&self.strides)
            .map(|(a, &s)| a.center((cell / s) % a.n))
            .collect()
    }

    /// Cell containing the internal-order point `x`.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let mut cell = 0;
        for ((a, s), &xi) in self.axes.iter().zip(&self.strides).zip(x) {
            cell += a.locate(xi)? * s;
        }
        Some(cell)
    }

    /// The same box with every axis refined by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        Self::from_axes(
            self.axes
                .iter()
                .map(|a| Axis {
                    n: a.n * factor,
                    ..*a
                })
                .collect(),
        )
    }
}

/// Per-cell symmetric `d_0 × d_0` diffusion matrices, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CellCoefficients {
    d0: usize,
    data: Vec<f64>,
}

impl CellCoefficients {
    pub fn identity(d0: usize, cells: usize) -> Self {
        let mut one = vec![0.0; d0 * d0];
        for a in 0..d0 {
            one[a * d0 + a] = 1.0;
        }
        Self {
            d0,
            data: one.repeat(cells),
        }
    }

    pub fn from_data(d0: usize, data: Vec<f64>) -> Result<Self> {
        if d0 == 0 || !data.len().is_multiple_of(d0 * d0) {
            return Err(Error::DimensionMismatch {
                expected: d0 * d0,
                got: data.len(),
            });
        }
        Ok(Self { d0, data })
    }

    pub fn d0(&self) -> usize {
        self.d0
    }
    pub fn cells(&self) -> usize {
        self.data.len() / (self.d0 * self.d0)
    }

    /// Row-major matrix of `cell`.
    pub fn at(&self, cell: usize) -> &[f64] {
        let m = self.d0 * self.d0;
        &self.data[cell * m..(cell + 1) * m]
    }

    pub fn entry(&self, cell: usize, a: usize, b: usize) -> f64 {
        self.data[cell * self.d0 * self.d0 + a * self.d0 + b]
    }

    /// Extreme eigenvalues over all cells.
    pub fn eigen_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in 0..self.cells() {
            let m = nalgebra::DMatrix::from_row_slice(self.d0, self.d0, self.at(c));
            let ev = m.symmetric_eigenvalues();
            lo = lo.min(ev.min());
            hi = hi.max(ev.max());
        }
        (lo, hi)
    }

    /// Per-cell symmetric square roots, row-major.
    pub fn sqrt(&self) -> Self {
        if self.d0 == 1 {
            return Self {
                d0: 1,
                data: self.data.iter().map(|a| a.max(0.0).sqrt()).collect(),
            };
        }
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.cells() {
            let m = nalgebra::DMatrix::from_row_slice(self.d0, self.d0, self.at(c));
            let e = m.symmetric_eigen();
            let d = nalgebra::DMatrix::from_diagonal(&e.eigenvalues.map(|x| x.max(0.0).sqrt()));
            let r = &e.eigenvectors * d * e.eigenvectors.transpose();
            for a in 0..self.d0 {
                for b in 0..self.d0 {
                    data.push(r[(a, b)]);
                }
            }
        }
        Self { d0: self.d0, data }
    }
}

/// Space-time field: snapshots of a phase-space grid function at the centres of time cells.
///
/// Snapshot `k` at time `times[k]` represents the time cell `(times[k] - τ/2, times[k] + τ/2]`.
#[derive(Clone, Debug)]
pub struct GridField {
    pub spec: SystemSpec,
    pub grid: PhaseGrid,
    pub times: Vec<f64>,
    pub tau: f64,
    pub values: Vec<Vec<f64>>,
    pub coefficient: CellCoefficients,
    pub source: Option<Vec<f64>>,
}

impl GridField {
    pub fn new(
        spec: &SystemSpec,
        grid: PhaseGrid,
        times: Vec<f64>,
        tau: f64,
        values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| v.len() != grid.len()) {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: v.len(),
            });
        }
        if !(tau > 0.0) {
            return Err(Error::InvalidParameters(format!(
                "time-cell width {tau} must be positive"
            )));
        }
        if values.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameters(
                "field values must be finite".into(),
            ));
        }
        let coefficient = CellCoefficients::identity(spec.d0(), grid.len());
        Ok(Self {
            spec: spec.clone(),
            grid,
            times,
            tau,
            values,
            coefficient,
            source: None,
        })
    }

    /// Sample `f(x, t)` at cell centres; `x` in internal order.
    pub fn from_fn(
        spec: &SystemSpec,
        grid: PhaseGrid,
        times: Vec<f64>,
        tau: f64,
        f: impl Fn(&[f64], f64) -> f64,
    ) -> Result<Self> {
        let centers: Vec<Vec<f64>> = (0..grid.len()).map(|c| grid.center(c)).collect();
        let values = times
            .iter()
            .map(|&t| centers.iter().map(|x| f(x, t)).collect())
            .collect();
        Self::new(spec, grid, times, tau, values)
    }

    pub fn with_coefficient(mut self, coefficient: CellCoefficients) -> Result<Self> {
        if coefficient.cells() != self.grid.len() || coefficient.d0() != self.spec.d0() {
            return Err(Error::DimensionMismatch {
                expected: self.grid.len(),
                got: coefficient.cells(),
            });
        }
        self.coefficient = coefficient;
        Ok(self)
    }

    pub fn with_source(mut self, source: Vec<f64>) -> Result<Self> {
        if source.len() != self.grid.len() {
            return Err(Error::DimensionMismatch {
                expected: self.grid.len(),
                got: source.len(),
            });
        }
        self.source = Some(source);
        Ok(self)
    }

    /// Time box covered by the snapshots.
    pub fn time_box(&self) -> (f64, f64) {
        let first = self.times.first().copied().unwrap_or(0.0);
        let last = self.times.last().copied().unwrap_or(0.0);
        (first - 0.5 * self.tau, last + 0.5 * self.tau)
    }

    /// `Σ f · vol` of snapshot `k`.
    pub fn mass(&self, k: usize) -> f64 {
        self.values[k].iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// True when the cylinder lies inside the space-time box of the field.
    pub fn contains_cylinder(&self, cyl: &Cylinder) -> bool {
        let (t_lo, t_hi) = cyl.actual_time_interval(&self.spec);
        let (b_lo, b_hi) = self.time_box();
        if t_lo < b_lo - 1e-12 || t_hi > b_hi + 1e-12 {
            return false;
        }
        let bbox = cyl.bounding_box(&self.spec);
        bbox.iter()
            .zip(self.grid.axes())
            .all(|(&(lo, hi), a)| lo >= a.lo - 1e-12 && hi <= a.hi + 1e-12)
    }

    /// `(snapshot, cell)` pairs whose centres lie in `cyl`.
    pub fn cells_in(&self, cyl: &Cylinder) -> Vec<(usize, usize)> {
        let (t_lo, t_hi) = cyl.actual_time_interval(&self.spec);
        let centred = cyl.center.flat().iter().all(|&x| x == 0.0);
        let spatial: Vec<usize> = if centred {
            // an origin-centred cylinder is a product of balls and a time interval
            let radii: Vec<f64> = (0..=self.spec.kappa())
                .map(|i| cyl.radius.powf(1.0 + 2.0 * i as f64 * self.spec.beta()))
                .collect();
            (0..self.grid.len())
                .filter(|&c| in_balls(&self.spec, &self.grid.center(c), &radii))
                .collect()
        } else {
            Vec::new()
        };
        let mut out = Vec::new();
        for (k, &t) in self.times.iter().enumerate() {
            if !(t > t_lo && t <= t_hi) {
                continue;
            }
            if centred {
                out.extend(spatial.iter().map(|&c| (k, c)));
                continue;
            }
            for c in 0..self.grid.len() {
                let x = nalgebra::DVector::from_vec(self.grid.center(c));
                let z = KineticPoint::from_flat(&self.spec, &x, t)
                    .expect("grid dimension matches spec");
                if cyl.contains(&self.spec, &z) {
                    out.push((k, c));
                }
            }
        }
        out
    }

    /// CSV dump of snapshot `k`: one row per cell with coordinates (display order), time and value.
    pub fn write_csv(&self, k: usize, mut w: impl Write) -> Result<()> {
        let n = self.spec.n();
        let mut header: Vec<String> = (0..n)
            .map(|j| format!("x{}", self.spec.display_index(j)))
            .collect();
        header.sort_by_key(|s| s[1..].parse::<usize>().unwrap_or(0));
        writeln!(w, "{},t,value", header.join(","))?;
        for c in 0..self.grid.len() {
            let x = self.grid.center(c);
            let mut disp = vec![0.0; n];
            for (j, xj) in x.iter().enumerate() {
                disp[self.spec.display_index(j)] = *xj;
            }
            let row: Vec<String> = disp.iter().map(|v| crate::io::fmt_f64(*v)).collect();
            writeln!(
                w,
                "{},{},{}",
                row.join(","),
                crate::io::fmt_f64(self.times[k]),
                crate::io::fmt_f64(self.values[k][c])
            )?;
        }
        Ok(())
    }
}

/// `|x^(i)| < radii[i]` for every layer.
pub(crate) fn in_balls(spec: &SystemSpec, x: &[f64], radii: &[f64]) -> bool {
    (0..=spec.kappa()).all(|i| {
        let o = spec.offset(i);
        let r2: f64 = x[o..o + spec.dims()[i]].iter().map(|v| v * v).sum();
        r2 < radii[i] * radii[i]
    })
}
