use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::geometry::{KineticPoint, SystemSpec};

/// Diffusivity matching `dV = dW`: the generator is `½Δ_v`.
pub const SDE_DIFFUSIVITY: f64 = 0.5;

/// Covariance added by `dx = Bx dt + √(2a) E dW` over elapsed time `τ`, where `E` injects into `x^(0)`:
/// `2a Σ_{m,n} τ^{m+n+1} / ((m+n+1) m! n!) B^m E Eᵀ (Bᵀ)^n`.
pub fn kernel_covariance(spec: &SystemSpec, tau: f64, diffusivity: f64) -> DMatrix<f64> {
    let n = spec.n();
    let d0 = spec.d0();
    let b = spec.assemble_b_internal();
    let k = spec.kappa();
    // B^m E for m = 0..=κ (B is nilpotent of order κ + 1)
    let mut powers = Vec::with_capacity(k + 1);
    let mut e = DMatrix::zeros(n, d0);
    for a in 0..d0 {
        e[(a, a)] = 1.0;
    }
    powers.push(e);
    for m in 1..=k {
        let next = &b * &powers[m - 1];
        powers.push(next);
    }
    let fact = |m: usize| (1..=m).map(|j| j as f64).product::<f64>();
    let mut cov = DMatrix::zeros(n, n);
    for (m, pm) in powers.iter().enumerate() {
        for (q, pq) in powers.iter().enumerate() {
            let c = tau.powi((m + q + 1) as i32) / ((m + q + 1) as f64 * fact(m) * fact(q));
            cov += pm * pq.transpose() * c;
        }
    }
    cov * (2.0 * diffusivity)
}

/// Normal density `N(mean, cov)` on phase space, internal coordinate order.
#[derive(Clone, Debug)]
pub struct Gaussian {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    log_norm: f64,
}

impl Gaussian {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                got: cov.nrows(),
            });
        }
        let chol = Cholesky::new(cov.clone())
            .ok_or_else(|| Error::Singular("covariance is not positive definite".into()))?;
        let log_det: f64 = chol.l().diagonal().iter().map(|x| 2.0 * x.ln()).sum();
        let log_norm = -0.5 * (mean.len() as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
        Ok(Self {
            mean,
            cov,
            chol,
            log_norm,
        })
    }

    /// Isotropic per-layer widths: `x^(i)` has standard deviation `sigma[i]`.
    pub fn layered(spec: &SystemSpec, mean: DVector<f64>, sigma: &[f64]) -> Result<Self> {
        if sigma.len() != spec.kappa() + 1 {
            return Err(Error::DimensionMismatch {
                expected: spec.kappa() + 1,
                got: sigma.len(),
            });
        }
        let mut cov = DMatrix::zeros(spec.n(), spec.n());
        for (i, s) in sigma.iter().enumerate() {
            for k in spec.offset(i)..spec.offset(i) + spec.dims()[i] {
                cov[(k, k)] = s * s;
            }
        }
        Self::new(mean, cov)
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }
    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        let d = DVector::from_column_slice(x) - &self.mean;
        let y = self
            .chol
            .l()
            .solve_lower_triangular(&d)
            .expect("Cholesky factor is invertible");
        (self.log_norm - 0.5 * y.norm_squared()).exp()
    }

    /// Law after evolving for `τ` under `∂_t f + (Bx)·∇f = a Δ_v f`.
    pub fn evolve(&self, spec: &SystemSpec, tau: f64, diffusivity: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::InvalidParameters(format!(
                "elapsed time {tau} must be positive"
            )));
        }
        let e = spec.exp_tb_internal(tau);
        let cov = &e * &self.cov * e.transpose() + kernel_covariance(spec, tau, diffusivity);
        Self::new(&e * &self.mean, cov)
    }
}

/// Heat kernel of `∂_t f + (Bx)·∇f = a Δ_v f` from `z_source`, as a Gaussian in the query's spatial variable.
pub fn kernel(
    spec: &SystemSpec,
    source: &KineticPoint,
    t_query: f64,
    diffusivity: f64,
) -> Result<Gaussian> {
    let tau = t_query - source.t();
    if !(tau > 0.0) {
        return Err(Error::InvalidParameters(format!(
            "elapsed time {tau} must be positive"
        )));
    }
    let mean = spec.exp_tb_internal(tau) * source.flat();
    Gaussian::new(mean, kernel_covariance(spec, tau, diffusivity))
}

/// Transition density of `dV = dW`, `dX^(i) = B_i X^(i-1) dt` from `z_source` to `z_query`.
pub fn fundamental_solution(
    spec: &SystemSpec,
    source: &KineticPoint,
    query: &KineticPoint,
) -> Result<f64> {
    let g = kernel(spec, source, query.t(), SDE_DIFFUSIVITY)?;
    Ok(g.density(query.flat().as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_covariance_pattern() {
        let spec = SystemSpec::chain(1, 1, 1.0, 1.0).unwrap();
        let t: f64 = 1.7;
        let c = kernel_covariance(&spec, t, SDE_DIFFUSIVITY);
        assert!((c[(0, 0)] - t).abs() < 1e-14);
        assert!((c[(1, 1)] - t.powi(3) / 3.0).abs() < 1e-14);
        assert!((c[(0, 1)] - t * t / 2.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_positive_time() {
        let spec = SystemSpec::chain(1, 1, 1.0, 1.0).unwrap();
        let z = KineticPoint::origin(&spec);
        assert!(fundamental_solution(&spec, &z, &z).is_err());
    }
}
