//! Quadrature for integrands with an `s^γ` singularity at `s = 0`.

use std::num::NonZeroUsize;

use gauss_quad::{FiniteAboveNegOneF64, GaussJacobi, GaussLegendre};

use crate::error::{Error, Result};

pub const DEFAULT_SPLIT: f64 = 0.5;

/// Gauss–Jacobi on `(0, s_0]` with weight `s^γ`, Gauss–Legendre on `[s_0, 1]`.
#[derive(Clone, Debug)]
pub struct SplitRule {
    jacobi: GaussJacobi,
    legendre: GaussLegendre,
    gamma: f64,
    s0: f64,
}

impl SplitRule {
    /// `degree` is rounded up to an even number: the crate pins the middle node of
    /// odd-degree Jacobi rules to zero, which is only right for symmetric weights.
    pub fn new(gamma: f64, s0: f64, degree: usize) -> Result<Self> {
        if !(s0 > 0.0 && s0 <= 1.0) {
            return Err(Error::InvalidParameters(format!(
                "split point {s0} outside (0, 1]"
            )));
        }
        let beta = FiniteAboveNegOneF64::new(gamma)
            .ok_or_else(|| Error::InvalidParameters(format!("weight exponent {gamma} <= -1")))?;
        let zero = FiniteAboveNegOneF64::new(0.0).expect("0 is above -1");
        let deg = degree.max(2) + degree % 2;
        let nz = NonZeroUsize::new(deg).expect("degree >= 2");
        Ok(Self {
            jacobi: GaussJacobi::new(nz, zero, beta),
            legendre: GaussLegendre::new(nz),
            gamma,
            s0,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `∫_0^1 f(s) ds`, where `f(s) s^{-γ}` is smooth near 0.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let g = self.gamma;
        let near =
            (self.s0 / 2.0).powf(g) * self.jacobi.integrate(0.0, self.s0, |s| f(s) * s.powf(-g));
        let far = if self.s0 < 1.0 {
            self.legendre.integrate(self.s0, 1.0, &f)
        } else {
            0.0
        };
        near + far
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn legendre_rule(n: usize) -> Vec<(f64, f64)> {
    let nz = NonZeroUsize::new(n.max(1)).expect("n >= 1");
    GaussLegendre::new(nz).iter().copied().collect()
}
