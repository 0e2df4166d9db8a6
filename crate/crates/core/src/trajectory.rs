//! Boundary-value control solves `Γ(0) = z_±`, `Γ(1) = z_0` and the affine maps built from them.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::control::ControlBasis;
use crate::error::{Error, Result};
use crate::geometry::{CylinderLayout, KineticPoint, SystemSpec};
use crate::linalg;
use crate::precise::{dd, DdMatrix, Lu};
use crate::wronskian::{WronskianBundle, DEFAULT_DELTA_MIN};

pub const DEFAULT_PSI_LIMIT: f64 = 0.5;
pub const NEAR_SINGULAR_CONDITION: f64 = 1e8;
pub const SLOPE_WINDOW: (f64, f64) = (1e-6, 1e-3);
pub const SLOPE_NODES: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MapKind {
    /// `x_0 ↦ Γ(s)`.
    Phi,
    /// `x_± ↦ Γ(s)`.
    Psi,
}

/// `x ↦ matrix · x + offset` on `R^N` (internal ordering).
#[derive(Clone, Debug)]
pub struct AffineMap {
    pub matrix: DMatrix<f64>,
    pub offset: DVector<f64>,
    pub s: f64,
    pub kind: MapKind,
    /// 2-norm condition number of `matrix`.
    pub condition: f64,
}

impl AffineMap {
    fn new(matrix: DMatrix<f64>, offset: DVector<f64>, s: f64, kind: MapKind) -> Self {
        let condition = linalg::condition_number(&matrix);
        Self {
            matrix,
            offset,
            s,
            kind,
            condition,
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x + &self.offset
    }

    /// `matrix^{-1} (y - offset)`.
    pub fn apply_inverse(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.matrix
            .clone()
            .lu()
            .solve(&(y - &self.offset))
            .ok_or_else(|| {
                Error::Singular(format!("affine map at s = {} is not invertible", self.s))
            })
    }

    pub fn near_singular(&self) -> bool {
        self.condition > NEAR_SINGULAR_CONDITION
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub delta_min: f64,
    /// Upper end of the `s`-range on which `Ψ^s` is requested.
    pub psi_limit: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            delta_min: DEFAULT_DELTA_MIN,
            psi_limit: DEFAULT_PSI_LIMIT,
        }
    }
}

/// Solved control problem between an endpoint `z_±` and `z_0`.
#[derive(Clone, Debug)]
pub struct TrajectoryBundle {
    wb: WronskianBundle,
    endpoint: KineticPoint,
    target: KineticPoint,
    x_end: DdMatrix,
    x0: DdMatrix,
    y: DdMatrix,
    m: DdMatrix,
    psi_limit: f64,
}

impl TrajectoryBundle {
    pub fn solve(
        spec: &SystemSpec,
        basis: &ControlBasis,
        z_endpoint: &KineticPoint,
        z0: &KineticPoint,
    ) -> Result<Self> {
        Self::solve_with(spec, basis, z_endpoint, z0, SolveOptions::default())
    }

    pub fn solve_with(
        spec: &SystemSpec,
        basis: &ControlBasis,
        z_endpoint: &KineticPoint,
        z0: &KineticPoint,
        opts: SolveOptions,
    ) -> Result<Self> {
        for z in [z_endpoint, z0] {
            KineticPoint::new(spec, z.layers().to_vec(), z.t())?;
        }
        let delta = z0.t() - z_endpoint.t();
        let wb = WronskianBundle::with_floor(spec, basis, delta, opts.delta_min)?;
        let x_end = DdMatrix::column_from_f64(&z_endpoint.flat());
        let x0 = DdMatrix::column_from_f64(&z0.flat());
        let y = x0.sub(&wb.t1_dd().mul(&x_end));
        let m = wb.g_dd().mul(&y);
        Ok(Self {
            wb,
            endpoint: z_endpoint.clone(),
            target: z0.clone(),
            x_end,
            x0,
            y,
            m,
            psi_limit: opts.psi_limit,
        })
    }

    pub fn wronskian(&self) -> &WronskianBundle {
        &self.wb
    }
    pub fn spec(&self) -> &SystemSpec {
        self.wb.spec()
    }
    pub fn delta(&self) -> f64 {
        self.wb.delta()
    }
    pub fn endpoint(&self) -> &KineticPoint {
        &self.endpoint
    }
    pub fn target(&self) -> &KineticPoint {
        &self.target
    }

    /// `M = (m^(0), …, m^(κ))`.
    pub fn control_coefficients(&self) -> DVector<f64> {
        self.m.column_to_f64()
    }

    /// `Y = x_0 - T(1) x_±`.
    pub fn defect(&self) -> DVector<f64> {
        self.y.column_to_f64()
    }

    pub fn is_pure_transport(&self) -> bool {
        self.m.max_abs() == 0.0
    }

    fn check_s(s: f64) -> Result<()> {
        if (0.0..=1.0).contains(&s) {
            Ok(())
        } else {
            Err(Error::InvalidParameters(format!(
                "s = {s} is outside [0, 1]"
            )))
        }
    }

    fn spatial_dd(&self, s: f64) -> DdMatrix {
        if s == 0.0 {
            return self.x_end.clone();
        }
        self.wb
            .transport_dd(s)
            .mul(&self.x_end)
            .add(&self.wb.wdelta_dd(s).mul(&self.m))
    }

    /// `Γ(s) = (T(s) x_± + W^δ(s) M, s t_0 + (1-s) t_±)`.
    pub fn eval(&self, s: f64) -> Result<KineticPoint> {
        Self::check_s(s)?;
        let t = s * self.target.t() + (1.0 - s) * self.endpoint.t();
        KineticPoint::from_flat(self.spec(), &self.spatial_dd(s).column_to_f64(), t)
    }

    /// `dΓ/ds` in space for `s > 0`: `δ B T(s) x_± + R W'(s) M`.
    pub fn tangent(&self, s: f64) -> Result<DVector<f64>> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::Singular(format!(
                "tangent needs s in (0, 1], got {s}"
            )));
        }
        let spec = self.spec();
        let basis = self.wb.basis();
        let k1 = spec.kappa() + 1;
        let d0 = spec.d0();
        let transport = spec.assemble_b_internal()
            * self.delta()
            * (self.wb.transport_matrix_t(s) * self.endpoint.flat());
        // W'(s): block (i, j) = g_j^{(κ-i+1)}(s) = s^{i+α_j} / p_j(i)
        let mut wp = DMatrix::zeros(k1 * d0, k1 * d0);
        for i in 0..k1 {
            for j in 0..k1 {
                let a = basis.alphas()[j];
                let v = s.powf(i as f64 + a) / basis.product(j, i);
                for c in 0..d0 {
                    wp[(i * d0 + c, j * d0 + c)] = v;
                }
            }
        }
        Ok(transport + self.wb.scaling_matrix_r() * wp * self.control_coefficients())
    }

    /// Largest coordinate error of `Γ(0)` against `z_±` and `Γ(1)` against `z_0`.
    pub fn endpoint_residual(&self) -> Result<f64> {
        Ok(self
            .eval(0.0)?
            .max_abs_diff(&self.endpoint)
            .max(self.eval(1.0)?.max_abs_diff(&self.target)))
    }

    /// `𝔄^s = W^δ(s) G`.
    fn frak_a_dd(&self, s: f64) -> DdMatrix {
        self.wb.wdelta_dd(s).mul(self.wb.g_dd())
    }

    /// `Φ^s(x_0) = 𝔄^s x_0 + 𝔅^s` with `𝔅^s = (T(s) - 𝔄^s T(1)) x_±`.
    pub fn phi_map(&self, s: f64) -> Result<AffineMap> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::Singular(format!(
                "phi map needs s in (0, 1], got {s}"
            )));
        }
        let a = self.frak_a_dd(s);
        let offset = self
            .wb
            .transport_dd(s)
            .sub(&a.mul(self.wb.t1_dd()))
            .mul(&self.x_end);
        Ok(AffineMap::new(
            a.to_f64(),
            offset.column_to_f64(),
            s,
            MapKind::Phi,
        ))
    }

    /// `Ψ^s(x_±) = 𝔞^s x_± + 𝔟^s` with `𝔞^s = T(s) - 𝔄^s T(1)` and `𝔟^s = 𝔄^s x_0`.
    pub fn psi_map(&self, s: f64) -> Result<AffineMap> {
        if !(s >= 0.0 && s <= self.psi_limit) {
            return Err(Error::InvalidParameters(format!(
                "psi map is requested on [0, {}], got s = {s}",
                self.psi_limit
            )));
        }
        let a = self.frak_a_dd(s);
        let matrix = self.wb.transport_dd(s).sub(&a.mul(self.wb.t1_dd()));
        let offset = a.mul(&self.x0);
        Ok(AffineMap::new(
            matrix.to_f64(),
            offset.column_to_f64(),
            s,
            MapKind::Psi,
        ))
    }

    /// `∇_{(0)} (Φ^s)^{-1} = (𝔄^s)^{-1} (Id_{d_0}; 0)`, an `N × d_0` matrix.
    pub fn grad_phi_inverse(&self, s: f64) -> Result<DMatrix<f64>> {
        grad_phi_inverse(&self.wb, s)
    }

    /// Least-squares slope of `log ‖∇_{(0)}(Φ^s)^{-1}‖` against `log s` on [`SLOPE_WINDOW`].
    pub fn singularity_slope(&self) -> Result<f64> {
        if self.is_pure_transport() {
            return Err(Error::Singular(
                "pure transport bundle: the control map is degenerate".into(),
            ));
        }
        singularity_slope(&self.wb)
    }
}

/// `∇_{(0)} (Φ^s)^{-1}` for a Wronskian bundle; independent of the endpoints.
pub fn grad_phi_inverse(wb: &WronskianBundle, s: f64) -> Result<DMatrix<f64>> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::Singular(format!(
            "inverse gradient needs s in (0, 1], got {s}"
        )));
    }
    if wb.spec().is_square() {
        return Ok(wb.grad_inverse_square_dd(s).to_f64());
    }
    let spec = wb.spec();
    let a = wb.wdelta_dd(s).mul(wb.g_dd());
    let mut e = DdMatrix::zeros(spec.n(), spec.d0());
    for c in 0..spec.d0() {
        e[(c, c)] = dd(1.0);
    }
    Ok(Lu::new(&a)?.solve(&e).to_f64())
}

/// Slope fit of the inverse-gradient blow-up; defined for square systems only.
pub fn singularity_slope(wb: &WronskianBundle) -> Result<f64> {
    if !wb.spec().is_square() {
        return Err(Error::Unsupported(
            "slope diagnostics need d_0 = … = d_κ".into(),
        ));
    }
    let (lo, hi) = SLOPE_WINDOW;
    let (llo, lhi) = (lo.ln(), hi.ln());
    let mut xs = Vec::with_capacity(SLOPE_NODES);
    let mut ys = Vec::with_capacity(SLOPE_NODES);
    for k in 0..SLOPE_NODES {
        let ls = llo + (lhi - llo) * k as f64 / (SLOPE_NODES - 1) as f64;
        xs.push(ls);
        ys.push(grad_phi_inverse(wb, ls.exp())?.norm().ln());
    }
    Ok(fit_slope(&xs, &ys))
}

/// Ordinary least-squares slope.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Empirical bound on how far the connecting trajectories travel.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundingRadius {
    /// Largest layer-wise Euclidean norm seen along any path.
    pub radius: f64,
    /// Per-layer maxima, `x^(0)` first.
    pub layer_max: Vec<f64>,
    /// Layer attaining `radius`.
    pub argmax_layer: usize,
    pub n_samples: usize,
}

/// Sample `z_± ∈ Q^±`, `z_0 ∈ Q^0`, connect both pairs and record the largest layer norms
/// over an `s`-grid of 65 points.
pub fn bounding_radius(
    spec: &SystemSpec,
    basis: &ControlBasis,
    layout: &CylinderLayout,
    n_samples: usize,
    seed: u64,
) -> Result<BoundingRadius> {
    let zs = layout
        .zero
        .sample(spec, n_samples, crate::rng::child_seed(seed, "q0", 0));
    let ps = layout
        .plus
        .sample(spec, n_samples, crate::rng::child_seed(seed, "q+", 0));
    let ms = layout
        .minus
        .sample(spec, n_samples, crate::rng::child_seed(seed, "q-", 0));
    let k1 = spec.kappa() + 1;
    let per: Vec<Result<Vec<f64>>> = (0..n_samples)
        .into_par_iter()
        .map(|k| {
            let mut best = vec![0.0f64; k1];
            for end in [&ps[k], &ms[k]] {
                let tb = TrajectoryBundle::solve(spec, basis, end, &zs[k])?;
                for q in 0..=64 {
                    let z = tb.eval(q as f64 / 64.0)?;
                    for (b, l) in best.iter_mut().zip(z.layers()) {
                        *b = b.max(l.norm());
                    }
                }
            }
            Ok(best)
        })
        .collect();
    let mut layer_max = vec![0.0f64; k1];
    for r in per {
        for (a, b) in layer_max.iter_mut().zip(r?) {
            *a = a.max(b);
        }
    }
    let (argmax_layer, radius) = layer_max
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    Ok(BoundingRadius {
        radius,
        layer_max,
        argmax_layer,
        n_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn chain1() -> (SystemSpec, ControlBasis) {
        (
            SystemSpec::chain(1, 1, 1.0, 1.0).unwrap(),
            ControlBasis::balanced(1, 1.0).unwrap(),
        )
    }

    #[test]
    fn pure_transport_has_no_control() {
        let (s, b) = chain1();
        let zp = KineticPoint::from_display(&s, &[0.2, 0.5, 0.0]).unwrap();
        // free transport over δ = -3: x ↦ x + δ v
        let z0 = KineticPoint::from_display(&s, &[0.2 - 1.5, 0.5, -3.0]).unwrap();
        let tb = TrajectoryBundle::solve(&s, &b, &zp, &z0).unwrap();
        assert!(tb.defect().amax() < 1e-15);
        assert!(tb.control_coefficients().amax() < 1e-12);
        assert!(tb.singularity_slope().is_err() || tb.control_coefficients().amax() > 0.0);
    }

    #[test]
    fn worked_endpoint_example() {
        let (s, b) = chain1();
        let zp = KineticPoint::origin(&s);
        let z0 = KineticPoint::from_display(&s, &[1.0, 1.0, -2.0]).unwrap();
        let tb = TrajectoryBundle::solve(&s, &b, &zp, &z0).unwrap();
        assert!(tb.endpoint_residual().unwrap() < 1e-12);
        let mid = tb.eval(0.5).unwrap();
        assert_relative_eq!(mid.t(), -1.0);
    }

    #[test]
    fn maps_at_extremes() {
        let (s, b) = chain1();
        let zp = KineticPoint::from_display(&s, &[0.3, -0.4, -0.5]).unwrap();
        let z0 = KineticPoint::from_display(&s, &[-0.2, 0.6, -2.5]).unwrap();
        let tb = TrajectoryBundle::solve(&s, &b, &zp, &z0).unwrap();
        let phi = tb.phi_map(1.0).unwrap();
        assert!((phi.matrix - DMatrix::identity(2, 2)).amax() < 1e-12);
        assert!(phi.offset.amax() < 1e-12);
        let psi = tb.psi_map(0.0).unwrap();
        assert_eq!(psi.matrix, DMatrix::identity(2, 2));
        assert_eq!(psi.offset, DVector::zeros(2));
        assert!(tb.phi_map(0.0).is_err());
        assert!(tb.psi_map(0.7).is_err());
        let g = tb.grad_phi_inverse(1.0).unwrap();
        assert!((g - DMatrix::from_row_slice(2, 1, &[1.0, 0.0])).amax() < 1e-12);
    }

    #[test]
    fn slope_fit_on_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, -1.0, -3.0, -5.0];
        assert_relative_eq!(fit_slope(&xs, &ys), -2.0, epsilon = 1e-14);
    }
}
