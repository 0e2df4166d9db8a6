//! Wronskian matrices `W(s) = P(s) ⊗ Id_{d_0}`, the scaling matrix `R`, `W^δ(s) = R W(s)`,
//! the transport matrix `T(s)` and the right inverse of `W^δ(1)`.
//!
//! All matrices use the internal layer ordering `x^(0), …, x^(κ)`. Row block `i` of `W(s)`
//! holds the `(κ-i)`-th derivatives of the controls.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::control::ControlBasis;
use crate::error::{Error, Result};
use crate::geometry::SystemSpec;
use crate::linalg;
use crate::precise::{dd, div, powf, to_f64, Dd, DdMatrix, Lu};

/// Default floor on `|δ|`; the standard cylinder layout has time gaps of at least 1.
pub const DEFAULT_DELTA_MIN: f64 = 1.0;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

#[derive(Clone, Debug)]
pub struct WronskianBundle {
    spec: SystemSpec,
    basis: ControlBasis,
    delta: f64,
    /// `inv_p[i][j] = 1 / p_j(i+1)`.
    inv_p: Vec<Vec<Dd>>,
    r: DmPair,
    w1: DMatrix<f64>,
    w1_inv: DMatrix<f64>,
    t1: DmPair,
    g: DmPair,
    /// First column of `C^{-1}` where `C_{ij} = 1/p_j(i+1)`.
    c_inv_col0: Vec<Dd>,
}

#[derive(Clone, Debug)]
struct DmPair {
    f: DMatrix<f64>,
    d: DdMatrix,
}

impl DmPair {
    fn new(d: DdMatrix) -> Self {
        Self { f: d.to_f64(), d }
    }
}

impl WronskianBundle {
    pub fn new(spec: &SystemSpec, basis: &ControlBasis, delta: f64) -> Result<Self> {
        Self::with_floor(spec, basis, delta, DEFAULT_DELTA_MIN)
    }

    pub fn with_floor(
        spec: &SystemSpec,
        basis: &ControlBasis,
        delta: f64,
        delta_min: f64,
    ) -> Result<Self> {
        if basis.kappa() != spec.kappa() {
            return Err(Error::DimensionMismatch {
                expected: spec.kappa(),
                got: basis.kappa(),
            });
        }
        if !(delta.is_finite() && delta.abs() >= delta_min) {
            return Err(Error::TimeDegenerate {
                delta: delta.abs(),
                floor: delta_min,
            });
        }
        let k1 = spec.kappa() + 1;
        let inv_p: Vec<Vec<Dd>> = (0..k1)
            .map(|i| {
                (0..k1)
                    .map(|j| {
                        let a = dd(basis.alphas()[j]);
                        let mut p = dd(1.0);
                        for k in 1..=i + 1 {
                            p *= dd(k as f64) + a;
                        }
                        div(dd(1.0), p)
                    })
                    .collect()
            })
            .collect();
        let c = DdMatrix::from_fn(k1, k1, |i, j| inv_p[i][j]);
        let c_lu = Lu::new(&c)
            .map_err(|_| Error::DegenerateBasis("coefficient matrix is singular".into()))?;
        let mut e0 = DdMatrix::zeros(k1, 1);
        e0[(0, 0)] = dd(1.0);
        let c_inv_col0 = c_lu.solve(&e0).columns(0, 1);
        let c_inv_col0 = (0..k1).map(|j| c_inv_col0[(j, 0)]).collect();

        let mut b = Self {
            spec: spec.clone(),
            basis: basis.clone(),
            delta,
            inv_p,
            r: DmPair::new(DdMatrix::zeros(0, 0)),
            w1: DMatrix::zeros(0, 0),
            w1_inv: DMatrix::zeros(0, 0),
            t1: DmPair::new(DdMatrix::zeros(0, 0)),
            g: DmPair::new(DdMatrix::zeros(0, 0)),
            c_inv_col0,
        };
        b.r = DmPair::new(b.r_dd_build());
        let w1 = b.wronskian_dd(1.0);
        let w1_lu = Lu::new(&w1).map_err(|_| Error::DegenerateBasis("W(1) is singular".into()))?;
        b.w1 = w1.to_f64();
        b.w1_inv = w1_lu.inverse().to_f64();
        b.t1 = DmPair::new(b.transport_dd(1.0));
        b.g = DmPair::new(b.right_inverse_dd()?);
        Ok(b)
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }
    pub fn basis(&self) -> &ControlBasis {
        &self.basis
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    /// `(κ+1) d_0`, the length of the coefficient vector `M`.
    pub fn n_controls(&self) -> usize {
        (self.spec.kappa() + 1) * self.spec.d0()
    }

    /// `P(s)_{ij} = g_j^{(κ-i)}(s) = s^{i+1+α_j} / p_j(i+1)`, built as row factor × column factor.
    pub(crate) fn p_dd(&self, s: f64) -> DdMatrix {
        let k1 = self.spec.kappa() + 1;
        if s == 0.0 {
            return DdMatrix::zeros(k1, k1);
        }
        let sd = dd(s);
        let col: Vec<Dd> = self
            .basis
            .alphas()
            .iter()
            .map(|&a| powf(sd, dd(a)))
            .collect();
        let mut row = Vec::with_capacity(k1);
        let mut acc = dd(1.0);
        for _ in 0..k1 {
            acc *= sd;
            row.push(acc);
        }
        DdMatrix::from_fn(k1, k1, |i, j| row[i] * col[j] * self.inv_p[i][j])
    }

    pub fn p_matrix(&self, s: f64) -> DMatrix<f64> {
        self.p_dd(s).to_f64()
    }

    fn kron_id(&self, p: &DdMatrix) -> DdMatrix {
        let d = self.spec.d0();
        let n = p.nrows() * d;
        let mut w = DdMatrix::zeros(n, p.ncols() * d);
        for i in 0..p.nrows() {
            for j in 0..p.ncols() {
                for c in 0..d {
                    w[(i * d + c, j * d + c)] = p[(i, j)];
                }
            }
        }
        w
    }

    pub(crate) fn wronskian_dd(&self, s: f64) -> DdMatrix {
        self.kron_id(&self.p_dd(s))
    }

    /// `W(s)`: block `(i, j)` is `g_j^{(κ-i)}(s) Id_{d_0}`.
    pub fn wronskian_matrix(&self, s: f64) -> Result<DMatrix<f64>> {
        check_s(s)?;
        Ok(self.wronskian_dd(s).to_f64())
    }

    fn r_dd_build(&self) -> DdMatrix {
        let spec = &self.spec;
        let d0 = spec.d0();
        let mut r = DdMatrix::zeros(spec.n(), self.n_controls());
        for i in 0..=spec.kappa() {
            let block = spec.composed(i, 1);
            let scale = self.delta.powi(i as i32);
            let bd = DdMatrix::from_fn(block.nrows(), block.ncols(), |a, b| {
                dd(block[(a, b)]) * dd(scale)
            });
            r.set_block(spec.offset(i), i * d0, &bd);
        }
        r
    }

    /// `R = blockdiag(Id_{d_0}, B̃_{1,1} δ, …, B̃_{κ,1} δ^κ)`, shape `N × (κ+1)d_0`.
    pub fn scaling_matrix_r(&self) -> DMatrix<f64> {
        self.r.f.clone()
    }

    pub(crate) fn wdelta_dd(&self, s: f64) -> DdMatrix {
        self.r.d.mul(&self.wronskian_dd(s))
    }

    /// `W^δ(s) = R W(s)`.
    pub fn wdelta(&self, s: f64) -> Result<DMatrix<f64>> {
        check_s(s)?;
        Ok(self.wdelta_dd(s).to_f64())
    }

    pub(crate) fn transport_dd(&self, s: f64) -> DdMatrix {
        let spec = &self.spec;
        let n = spec.n();
        let mut t = DdMatrix::zeros(n, n);
        let sdelta = dd(s) * dd(self.delta);
        for i in 0..=spec.kappa() {
            for j in 0..=i {
                let block = spec.composed(i, j + 1);
                let mut c = dd(1.0);
                for _ in 0..i - j {
                    c *= sdelta;
                }
                c /= factorial(i - j);
                let bd =
                    DdMatrix::from_fn(block.nrows(), block.ncols(), |a, b| dd(block[(a, b)]) * c);
                t.set_block(spec.offset(i), spec.offset(j), &bd);
            }
        }
        t
    }

    /// `T(s)`: unit block lower triangular, block `(i, j)` equal to `(sδ)^{i-j}/(i-j)! B̃_{i,j+1}`.
    pub fn transport_matrix_t(&self, s: f64) -> DMatrix<f64> {
        self.transport_dd(s).to_f64()
    }

    pub(crate) fn t1_dd(&self) -> &DdMatrix {
        &self.t1.d
    }

    pub fn transport_t1(&self) -> &DMatrix<f64> {
        &self.t1.f
    }

    pub fn w1(&self) -> &DMatrix<f64> {
        &self.w1
    }
    pub fn w1_inverse(&self) -> &DMatrix<f64> {
        &self.w1_inv
    }

    /// Exponent `d_0 ((κ+1)(κ+2)/2 + Σ α_i)` of the determinant scale law.
    pub fn det_exponent(&self) -> f64 {
        let k = self.spec.kappa() as f64;
        let sum_a: f64 = self.basis.alphas().iter().sum();
        self.spec.d0() as f64 * ((k + 1.0) * (k + 2.0) / 2.0 + sum_a)
    }

    /// Closed form `(Π_{i<j}(α_i-α_j) / Π_{i,j}(1+i+α_j))^{d_0} s^{det_exponent}`.
    pub fn det_closed_form(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::InvalidParameters(format!("s = {s} must be >= 0")));
        }
        if s == 0.0 {
            return Ok(0.0);
        }
        let a = self.basis.alphas();
        let k1 = a.len();
        let mut num = dd(1.0);
        for i in 0..k1 {
            for j in i + 1..k1 {
                num *= dd(a[i]) - dd(a[j]);
            }
        }
        let mut den = dd(1.0);
        for i in 0..k1 {
            for &aj in a {
                den *= dd(1.0 + i as f64) + dd(aj);
            }
        }
        let base = to_f64(div(num, den));
        Ok(base.powi(self.spec.d0() as i32) * s.powf(self.det_exponent()))
    }

    /// Determinant of `W(s)` by LU in double-double.
    pub fn det_numeric(&self, s: f64) -> Result<f64> {
        check_s(s)?;
        if s == 0.0 {
            return Ok(0.0);
        }
        Ok(to_f64(Lu::new(&self.wronskian_dd(s))?.det()))
    }

    /// Moore–Penrose inverse of `W^δ(1)`, so `W^δ(1) G = Id_N` and `G Y` is the
    /// minimum-norm solution of `W^δ(1) M = Y`. In the square case this is the inverse.
    fn right_inverse_dd(&self) -> Result<DdMatrix> {
        let a = self.wdelta_dd(1.0);
        let degenerate = |_| Error::DegenerateBasis("W^δ(1) is singular".into());
        if a.nrows() == a.ncols() {
            return Ok(Lu::new(&a).map_err(degenerate)?.inverse());
        }
        let at = a.transpose();
        let gram = a.mul(&at);
        let sol = Lu::new(&gram)
            .map_err(degenerate)?
            .solve(&DdMatrix::identity(a.nrows()));
        Ok(at.mul(&sol))
    }

    pub(crate) fn g_dd(&self) -> &DdMatrix {
        &self.g.d
    }

    /// Right inverse `G` of `W^δ(1)` (shape `(κ+1)d_0 × N`).
    pub fn pseudo_inverse_wdelta1(&self) -> &DMatrix<f64> {
        &self.g.f
    }

    /// The factored right inverse `W(1)^{-1} R^+`, with `R^+` from an SVD.
    pub fn factored_right_inverse(&self) -> Result<DMatrix<f64>> {
        Ok(&self.w1_inv * linalg::pinv(&self.r.f)?)
    }

    /// `W^δ(1)^+` from a plain `f64` SVD, kept as an independent cross-check.
    pub fn svd_pseudo_inverse(&self) -> Result<DMatrix<f64>> {
        linalg::pinv(&self.wdelta_dd(1.0).to_f64())
    }

    /// Square case: `∇_{(0)}(Φ^s)^{-1} = W^δ(1) W^δ(s)^{-1} (Id; 0)` in the factored form
    /// `block_i = δ^i B̃_{i,1} Σ_j p_j(i+1)^{-1} (C^{-1})_{j0} s^{-1-α_j}`.
    pub(crate) fn grad_inverse_square_dd(&self, s: f64) -> DdMatrix {
        let spec = &self.spec;
        let d0 = spec.d0();
        let k1 = spec.kappa() + 1;
        let sd = dd(s);
        let q: Vec<Dd> = (0..k1)
            .map(|j| self.c_inv_col0[j] * powf(sd, dd(-1.0 - self.basis.alphas()[j])))
            .collect();
        let mut out = DdMatrix::zeros(spec.n(), d0);
        for i in 0..k1 {
            let mut c = dd(0.0);
            for (p, qj) in self.inv_p[i].iter().zip(&q) {
                c += *p * *qj;
            }
            // R block i applied to c·Id_{d_0}
            for a in 0..spec.dims()[i] {
                for b in 0..d0 {
                    out[(spec.offset(i) + a, b)] = self.r.d[(spec.offset(i) + a, i * d0 + b)] * c;
                }
            }
        }
        out
    }
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

/// Closed-form against numeric determinants of `W(s)` over random exponent sets.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeterminantCheck {
    pub kappa: usize,
    pub d0: usize,
    pub trials: usize,
    pub samples: Vec<f64>,
    pub max_relative_error: f64,
    pub worst_alphas: Vec<f64>,
    pub worst_s: f64,
}

/// Sample points used by [`determinant_check`].
pub const DET_SAMPLES: [f64; 3] = [0.1, 0.5, 1.0];

/// Run the determinant oracle on `trials` exponent sets drawn from `seed`, or on `alphas` alone.
pub fn determinant_check(
    spec: &SystemSpec,
    alphas: Option<&[f64]>,
    trials: usize,
    seed: u64,
) -> Result<DeterminantCheck> {
    let mut r = crate::rng::stream(seed, "determinant-check");
    let sets: Vec<Vec<f64>> = match alphas {
        Some(a) => vec![a.to_vec()],
        None => (0..trials)
            .map(|_| crate::control::random_alphas(&mut r, spec.kappa(), 1e-6))
            .collect(),
    };
    let mut out = DeterminantCheck {
        kappa: spec.kappa(),
        d0: spec.d0(),
        trials: sets.len(),
        samples: DET_SAMPLES.to_vec(),
        max_relative_error: 0.0,
        worst_alphas: vec![],
        worst_s: 0.0,
    };
    for a in sets {
        let basis = ControlBasis::new(spec.kappa(), spec.beta(), a.clone())?;
        let wb = WronskianBundle::new(spec, &basis, 1.0)?;
        for &s in &DET_SAMPLES {
            let exact = wb.det_closed_form(s)?;
            let num = wb.det_numeric(s)?;
            let rel = ((num - exact) / exact).abs();
            if !(rel <= out.max_relative_error) {
                out.max_relative_error = rel;
                out.worst_alphas = a.clone();
                out.worst_s = s;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bundle(alphas: Vec<f64>, delta: f64) -> WronskianBundle {
        let k = alphas.len() - 1;
        let spec = SystemSpec::chain(k, 1, 1.0, 1.0).unwrap();
        let basis = ControlBasis::new(k, 1.0, alphas).unwrap();
        WronskianBundle::new(&spec, &basis, delta).unwrap()
    }

    #[test]
    fn w1_entries_and_det() {
        let b = bundle(vec![-1.0 / 3.0, -2.0 / 3.0], 2.0);
        let w = b.wronskian_matrix(1.0).unwrap();
        // rows: first derivatives, then values
        let expect = DMatrix::from_row_slice(2, 2, &[1.5, 3.0, 0.9, 2.25]);
        assert!((w - expect).amax() < 1e-15);
        assert_relative_eq!(b.det_closed_form(1.0).unwrap(), 0.675, max_relative = 1e-14);
        assert_relative_eq!(b.det_numeric(1.0).unwrap(), 0.675, max_relative = 1e-14);
        assert_relative_eq!(
            b.det_closed_form(0.5).unwrap(),
            0.675 * 0.25,
            max_relative = 1e-14
        );
        assert_eq!(b.det_closed_form(0.0).unwrap(), 0.0);
        assert!(b.wronskian_matrix(0.0).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn transport_example() {
        let b = bundle(vec![-0.7, -0.6], 2.0);
        assert_eq!(
            b.transport_matrix_t(1.0),
            DMatrix::from_row_slice(2, 2, &[1., 0., 2., 1.])
        );
        assert_eq!(b.transport_matrix_t(0.0), DMatrix::identity(2, 2));
    }

    #[test]
    fn transport_is_exp_of_b() {
        let blocks = vec![
            DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.3, 0.8]),
            DMatrix::from_row_slice(1, 2, &[0.2, 1.1]),
        ];
        let spec = SystemSpec::new(2, 1.0, vec![2, 2, 1], blocks, 2.0).unwrap();
        let basis = ControlBasis::balanced(2, 1.0).unwrap();
        let b = WronskianBundle::new(&spec, &basis, -2.5).unwrap();
        for &s in &[0.0, 0.3, 1.0] {
            let diff = b.transport_matrix_t(s) - spec.exp_tb_internal(s * -2.5);
            assert!(diff.amax() < 1e-14);
        }
    }

    #[test]
    fn delta_floor_and_degenerate() {
        let spec = SystemSpec::chain(1, 1, 1.0, 1.0).unwrap();
        let basis = ControlBasis::balanced(1, 1.0).unwrap();
        assert!(matches!(
            WronskianBundle::new(&spec, &basis, 0.5),
            Err(Error::TimeDegenerate { .. })
        ));
        assert!(WronskianBundle::with_floor(&spec, &basis, 0.5, 0.1).is_ok());
    }

    #[test]
    fn right_inverse_non_square() {
        let spec = SystemSpec::new(
            1,
            1.0,
            vec![2, 1],
            vec![DMatrix::from_row_slice(1, 2, &[1.0, 0.0])],
            1.0,
        )
        .unwrap();
        let basis = ControlBasis::balanced(1, 1.0).unwrap();
        let b = WronskianBundle::new(&spec, &basis, 2.0).unwrap();
        let a = b.wdelta(1.0).unwrap();
        let g = b.pseudo_inverse_wdelta1();
        assert!((&a * g - DMatrix::identity(3, 3)).amax() < 1e-10);
        let p = g * &a;
        assert!((&p * &p - &p).amax() < 1e-10);
        let f = b.factored_right_inverse().unwrap();
        assert!((&a * f - DMatrix::identity(3, 3)).amax() < 1e-9);
        let svd = b.svd_pseudo_inverse().unwrap();
        assert!((svd - g).amax() < 1e-6 * g.amax());
    }
}
