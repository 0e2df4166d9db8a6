use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SystemSpec;

use super::grid::{CellCoefficients, GridField, PhaseGrid};

/// What the stencil sees beyond the edge of an axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Periodic,
    /// Ghost cells hold zero.
    DirichletZero,
    /// Ghost cells hold the initial value of the adjacent boundary cell for all time.
    FrozenInflow,
    /// Ghost cells copy the adjacent boundary cell (zero normal gradient).
    NoFlux,
}

/// One [`Boundary`] per grid axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPolicy {
    pub axes: Vec<Boundary>,
}

impl BoundaryPolicy {
    /// Dirichlet-zero in `x^(0)`, periodic in every other layer.
    pub fn standard(spec: &SystemSpec) -> Self {
        let axes = (0..spec.n())
            .map(|k| {
                if k < spec.d0() {
                    Boundary::DirichletZero
                } else {
                    Boundary::Periodic
                }
            })
            .collect();
        Self { axes }
    }

    pub fn uniform(spec: &SystemSpec, b: Boundary) -> Self {
        Self {
            axes: vec![b; spec.n()],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdConfig {
    pub dt: f64,
    pub steps: usize,
    pub t_start: f64,
    /// Store a snapshot every this many steps; `steps` must be a multiple.
    pub record_every: usize,
    pub boundary: BoundaryPolicy,
}

/// Run metadata for manifests.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchemeInfo {
    pub scheme: &'static str,
    pub dt: f64,
    pub steps: usize,
    pub record_every: usize,
    pub t_start: f64,
    pub t_end: f64,
    /// `dt` times the monotonicity rate; stable when at most 1.
    pub cfl_number: f64,
    pub boundary: BoundaryPolicy,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct FdRun {
    pub field: GridField,
    pub info: SchemeInfo,
}

const NONE: usize = usize::MAX;

struct Stencil {
    /// `nb[c * 2n + 2k + side]`, `side` 0 = minus, 1 = plus; `NONE` beyond a non-periodic edge.
    nb: Vec<usize>,
    /// Transport speeds `(B_i x^(i-1))_c` per cell for axes `d_0..n`.
    speed: Vec<f64>,
    h: Vec<f64>,
    n: usize,
    d0: usize,
}

impl Stencil {
    fn new(spec: &SystemSpec, grid: &PhaseGrid, boundary: &BoundaryPolicy) -> Self {
        let n = grid.dim();
        let d0 = spec.d0();
        let axes = grid.axes();
        let strides = grid.strides();
        let mut nb = vec![NONE; grid.len() * 2 * n];
        let mut speed = vec![0.0; grid.len() * (n - d0)];
        for c in 0..grid.len() {
            let idx = grid.multi_index(c);
            for k in 0..n {
                let nk = axes[k].n;
                let periodic = boundary.axes[k] == Boundary::Periodic;
                let minus = if idx[k] > 0 {
                    c - strides[k]
                } else if periodic {
                    c + (nk - 1) * strides[k]
                } else {
                    NONE
                };
                let plus = if idx[k] + 1 < nk {
                    c + strides[k]
                } else if periodic {
                    c - (nk - 1) * strides[k]
                } else {
                    NONE
                };
                nb[c * 2 * n + 2 * k] = minus;
                nb[c * 2 * n + 2 * k + 1] = plus;
            }
            let x = grid.center(c);
            for i in 1..=spec.kappa() {
                let b = spec.block(i);
                let prev = spec.offset(i - 1);
                for r in 0..spec.dims()[i] {
                    let u: f64 = (0..spec.dims()[i - 1])
                        .map(|q| b[(r, q)] * x[prev + q])
                        .sum();
                    speed[c * (n - d0) + spec.offset(i) + r - d0] = u;
                }
            }
        }
        Self {
            nb,
            speed,
            h: axes.iter().map(|a| a.h()).collect(),
            n,
            d0,
        }
    }

    fn max_speed(&self, k: usize) -> f64 {
        let m = self.n - self.d0;
        self.speed
            .iter()
            .skip(k - self.d0)
            .step_by(m)
            .fold(0.0, |acc: f64, u| acc.max(u.abs()))
    }
}

/// `dt` at which the scheme is exactly at its monotonicity limit:
/// `1 / (Σ_v 2 a_max / h² + Σ_x max|Bx| / h)`.
pub fn stable_dt(spec: &SystemSpec, grid: &PhaseGrid, coefficient: &CellCoefficients) -> f64 {
    let stencil = Stencil::new(spec, grid, &BoundaryPolicy::standard(spec));
    1.0 / monotone_rate(&stencil, coefficient)
}

fn monotone_rate(stencil: &Stencil, coefficient: &CellCoefficients) -> f64 {
    let (_, a_max) = coefficient.eigen_range();
    let diff: f64 = (0..stencil.d0)
        .map(|a| 2.0 * a_max / (stencil.h[a] * stencil.h[a]))
        .sum();
    let adv: f64 = (stencil.d0..stencil.n)
        .map(|k| stencil.max_speed(k) / stencil.h[k])
        .sum();
    diff + adv
}

/// Explicit Euler for `∂_t f + (Bx)·∇_x f = ∇_v·(A ∇_v f) + S`.
///
/// Diffusion uses face fluxes with the harmonic mean of the two adjacent `A_aa` and the arithmetic
/// mean of off-diagonal entries against averaged centred cross-gradients. Transport is first-order
/// upwind. Each face flux is evaluated by the same expression from both sides, so interior fluxes cancel.
pub fn fd_solve(
    spec: &SystemSpec,
    grid: &PhaseGrid,
    coefficient: &CellCoefficients,
    source: Option<&[f64]>,
    initial: &[f64],
    cfg: &FdConfig,
) -> Result<FdRun> {
    if spec.beta() != 1.0 {
        return Err(Error::Unsupported(format!(
            "finite differences need the local case beta = 1, got {}",
            spec.beta()
        )));
    }
    if grid.dim() != spec.n() {
        return Err(Error::DimensionMismatch {
            expected: spec.n(),
            got: grid.dim(),
        });
    }
    if initial.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: initial.len(),
        });
    }
    if coefficient.cells() != grid.len() || coefficient.d0() != spec.d0() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: coefficient.cells(),
        });
    }
    if let Some(s) = source {
        if s.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: s.len(),
            });
        }
    }
    if cfg.boundary.axes.len() != spec.n() {
        return Err(Error::DimensionMismatch {
            expected: spec.n(),
            got: cfg.boundary.axes.len(),
        });
    }
    if !(cfg.dt > 0.0 && cfg.dt.is_finite())
        || cfg.record_every == 0
        || !cfg.steps.is_multiple_of(cfg.record_every)
    {
        return Err(Error::InvalidParameters(format!(
            "need dt > 0 and steps ({}) a multiple of record_every ({})",
            cfg.steps, cfg.record_every
        )));
    }
    if initial.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameters(
            "initial data must be finite".into(),
        ));
    }
    let stencil = Stencil::new(spec, grid, &cfg.boundary);
    let rate = monotone_rate(&stencil, coefficient);
    let cfl_number = cfg.dt * rate;
    if cfl_number > 1.0 {
        return Err(Error::Cfl {
            dt: cfg.dt,
            suggested: 0.9 / rate,
        });
    }

    let frozen = initial.to_vec();
    let mut f = initial.to_vec();
    let mut next = vec![0.0; f.len()];
    let mut times = vec![cfg.t_start];
    let mut values = vec![f.clone()];
    for step in 1..=cfg.steps {
        next.par_iter_mut().enumerate().for_each(|(c, out)| {
            *out =
                f[c] + cfg.dt * rhs(&stencil, &cfg.boundary, coefficient, &f, &frozen, source, c);
        });
        std::mem::swap(&mut f, &mut next);
        if f.iter().any(|x| !x.is_finite()) {
            return Err(Error::Divergence { step });
        }
        if step % cfg.record_every == 0 {
            times.push(cfg.t_start + step as f64 * cfg.dt);
            values.push(f.clone());
        }
    }
    let tau = cfg.dt * cfg.record_every as f64;
    let mut field = GridField::new(spec, grid.clone(), times, tau, values)?
        .with_coefficient(coefficient.clone())?;
    if let Some(s) = source {
        field = field.with_source(s.to_vec())?;
    }
    let info = SchemeInfo {
        scheme: "explicit-euler/upwind/harmonic-face-flux",
        dt: cfg.dt,
        steps: cfg.steps,
        record_every: cfg.record_every,
        t_start: cfg.t_start,
        t_end: cfg.t_start + cfg.steps as f64 * cfg.dt,
        cfl_number,
        boundary: cfg.boundary.clone(),
        shape: grid.axes().iter().map(|a| a.n).collect(),
    };
    Ok(FdRun { field, info })
}

/// Value of `f` one cell from `c` along axis `k`, ghost cells included.
#[inline]
fn fetch(
    st: &Stencil,
    bc: &BoundaryPolicy,
    f: &[f64],
    frozen: &[f64],
    c: usize,
    k: usize,
    side: usize,
) -> f64 {
    let j = st.nb[c * 2 * st.n + 2 * k + side];
    if j != NONE {
        return f[j];
    }
    match bc.axes[k] {
        Boundary::DirichletZero => 0.0,
        Boundary::FrozenInflow => frozen[c],
        Boundary::NoFlux | Boundary::Periodic => f[c],
    }
}

#[inline]
fn cross_gradient(
    st: &Stencil,
    bc: &BoundaryPolicy,
    f: &[f64],
    frozen: &[f64],
    c: usize,
    b: usize,
) -> f64 {
    (fetch(st, bc, f, frozen, c, b, 1) - fetch(st, bc, f, frozen, c, b, 0)) / (2.0 * st.h[b])
}

/// Flux `(A ∇_v f)_a` through the face between `left` and its `+a` neighbour `right`.
/// `right_value` and `right_cell` describe the neighbour, which may be a ghost sharing `left`'s coefficients.
#[allow(clippy::too_many_arguments)]
#[inline]
fn face_flux(
    st: &Stencil,
    bc: &BoundaryPolicy,
    a_field: &CellCoefficients,
    f: &[f64],
    frozen: &[f64],
    a: usize,
    left: usize,
    right: usize,
    left_value: f64,
    right_value: f64,
) -> f64 {
    let al = a_field.entry(left, a, a);
    let ar = a_field.entry(right, a, a);
    let harmonic = if al == ar {
        al
    } else {
        2.0 * al * ar / (al + ar)
    };
    let mut flux = harmonic * (right_value - left_value) / st.h[a];
    for b in 0..st.d0 {
        if b == a {
            continue;
        }
        let avg = 0.5 * (a_field.entry(left, a, b) + a_field.entry(right, a, b));
        if avg != 0.0 {
            let g = 0.5
                * (cross_gradient(st, bc, f, frozen, left, b)
                    + cross_gradient(st, bc, f, frozen, right, b));
            flux += avg * g;
        }
    }
    flux
}

fn rhs(
    st: &Stencil,
    bc: &BoundaryPolicy,
    a_field: &CellCoefficients,
    f: &[f64],
    frozen: &[f64],
    source: Option<&[f64]>,
    c: usize,
) -> f64 {
    let n = st.n;
    let mut acc = 0.0;
    for a in 0..st.d0 {
        let plus = st.nb[c * 2 * n + 2 * a + 1];
        let minus = st.nb[c * 2 * n + 2 * a];
        let fp = fetch(st, bc, f, frozen, c, a, 1);
        let fm = fetch(st, bc, f, frozen, c, a, 0);
        let right = if plus == NONE { c } else { plus };
        let left = if minus == NONE { c } else { minus };
        let flux_plus = face_flux(st, bc, a_field, f, frozen, a, c, right, f[c], fp);
        let flux_minus = face_flux(st, bc, a_field, f, frozen, a, left, c, fm, f[c]);
        acc += (flux_plus - flux_minus) / st.h[a];
    }
    let m = n - st.d0;
    for k in st.d0..n {
        let u = st.speed[c * m + k - st.d0];
        if u > 0.0 {
            acc -= u * (f[c] - fetch(st, bc, f, frozen, c, k, 0)) / st.h[k];
        } else if u < 0.0 {
            acc -= u * (fetch(st, bc, f, frozen, c, k, 1) - f[c]) / st.h[k];
        }
    }
    if let Some(s) = source {
        acc += s[c];
    }
    acc
}
