//! Control functions `g_i(s) = s^{1+κ+α_i} / ((1+α_i)(2+α_i)⋯(1+κ+α_i))`.

use crate::error::{Error, Result};

pub const DEFAULT_SPREAD: f64 = 0.02;
const MIN_GAP: f64 = 1e-9;

/// `ε` of the structural assumption: 0 in the local case, else `min(0.01, (1-β)/2)`.
pub fn default_epsilon(beta: f64) -> f64 {
    if beta >= 1.0 {
        0.0
    } else {
        0.01_f64.min((1.0 - beta) / 2.0)
    }
}

/// `κ+1` equally spaced exponents centred at `(2+β+ε)^{-1} - 1`, spacing `spread`.
pub fn default_alphas(kappa: usize, beta: f64, epsilon: f64, spread: f64) -> Result<Vec<f64>> {
    if !(spread > MIN_GAP) {
        return Err(Error::InvalidParameters(format!(
            "spread {spread} violates distinctness"
        )));
    }
    let center = 1.0 / (2.0 + beta + epsilon) - 1.0;
    let mid = kappa as f64 / 2.0;
    let alphas: Vec<f64> = (0..=kappa)
        .map(|i| center + (i as f64 - mid) * spread)
        .collect();
    if alphas.iter().any(|&a| !(a > -1.0 && a < 0.0)) {
        return Err(Error::InvalidParameters(format!(
            "spread {spread} pushes exponents outside (-1, 0)"
        )));
    }
    Ok(alphas)
}

/// `p(m) = (1+α)(2+α)⋯(m+α)`; log-space accumulation for long chains.
pub fn rising_product(alpha: f64, m: usize, log_space: bool) -> f64 {
    if log_space {
        (1..=m).map(|k| (k as f64 + alpha).ln()).sum::<f64>().exp()
    } else {
        (1..=m).map(|k| k as f64 + alpha).product()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControlBasis {
    alphas: Vec<f64>,
    kappa: usize,
    beta: f64,
    epsilon: f64,
}

impl ControlBasis {
    pub fn new(kappa: usize, beta: f64, alphas: Vec<f64>) -> Result<Self> {
        if alphas.len() != kappa + 1 {
            return Err(Error::DimensionMismatch {
                expected: kappa + 1,
                got: alphas.len(),
            });
        }
        if let Some(a) = alphas.iter().find(|a| !(**a > -1.0 && **a < 0.0)) {
            return Err(Error::InvalidParameters(format!(
                "exponent {a} is outside (-1, 0)"
            )));
        }
        for i in 0..alphas.len() {
            for j in i + 1..alphas.len() {
                if (alphas[i] - alphas[j]).abs() <= MIN_GAP {
                    return Err(Error::DegenerateBasis(format!(
                        "exponents {i} and {j} coincide ({} vs {})",
                        alphas[i], alphas[j]
                    )));
                }
            }
        }
        Ok(Self {
            alphas,
            kappa,
            beta,
            epsilon: default_epsilon(beta),
        })
    }

    /// Balanced default with the default spread.
    pub fn balanced(kappa: usize, beta: f64) -> Result<Self> {
        let eps = default_epsilon(beta);
        Self::new(
            kappa,
            beta,
            default_alphas(kappa, beta, eps, DEFAULT_SPREAD)?,
        )
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }
    pub fn kappa(&self) -> usize {
        self.kappa
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn max_alpha(&self) -> f64 {
        self.alphas
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
    pub fn min_alpha(&self) -> f64 {
        self.alphas.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn log_space(&self) -> bool {
        self.kappa > 8
    }

    /// `(1+α_i)⋯(m+α_i)`.
    pub fn product(&self, i: usize, m: usize) -> f64 {
        rising_product(self.alphas[i], m, self.log_space())
    }

    /// `g_i^{(m)}(s) = s^{κ+1-m+α_i} / p_i(κ+1-m)`; order `κ+1` is `s^{α_i}`.
    pub fn g_eval(&self, i: usize, m: usize, s: f64) -> Result<f64> {
        if i > self.kappa {
            return Err(Error::IndexOutOfRange(format!(
                "control index {i} > {}",
                self.kappa
            )));
        }
        if m > self.kappa + 1 {
            return Err(Error::IndexOutOfRange(format!(
                "derivative order {m} > {}",
                self.kappa + 1
            )));
        }
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::InvalidParameters(format!(
                "s = {s} is outside [0, 1]"
            )));
        }
        let k = self.kappa + 1 - m;
        if s == 0.0 {
            if k == 0 {
                return Err(Error::Singular(format!("g_{i}^({m}) diverges at s = 0")));
            }
            return Ok(0.0);
        }
        Ok(s.powf(k as f64 + self.alphas[i]) / self.product(i, k))
    }
}

/// `κ + 1` exponents uniform in `(-1, 0)` with pairwise gaps of at least `min_gap`.
pub fn random_alphas<R: rand::Rng>(r: &mut R, kappa: usize, min_gap: f64) -> Vec<f64> {
    loop {
        let a: Vec<f64> = (0..=kappa)
            .map(|_| -r.random_range(1e-6..1.0 - 1e-6))
            .collect();
        let separated = a
            .iter()
            .enumerate()
            .all(|(i, x)| a[i + 1..].iter().all(|y| (x - y).abs() >= min_gap));
        if separated {
            return a;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_alphas_centre() {
        let a = default_alphas(1, 1.0, 0.0, 0.02).unwrap();
        assert_relative_eq!(a[0], -2.0 / 3.0 - 0.01, epsilon = 1e-15);
        assert_relative_eq!(a[1], -2.0 / 3.0 + 0.01, epsilon = 1e-15);
        assert!(default_alphas(1, 1.0, 0.0, 0.0).is_err());
        let a = default_alphas(2, 0.5, 0.1, 0.02).unwrap();
        assert_relative_eq!(a[1], 1.0 / 2.6 - 1.0, epsilon = 1e-15);
        assert_relative_eq!(a[1], -0.615_384_615_384_615_4, epsilon = 1e-12);
        assert!(default_alphas(3, 1.0, 0.0, 0.3).is_err());
    }

    #[test]
    fn epsilon_defaults() {
        assert_eq!(default_epsilon(1.0), 0.0);
        assert_eq!(default_epsilon(0.5), 0.01);
        assert_relative_eq!(default_epsilon(0.99), 0.005, epsilon = 1e-15);
    }

    #[test]
    fn g_values() {
        let b = ControlBasis::new(1, 1.0, vec![-0.5, -0.25]).unwrap();
        for m in 0..=1 {
            assert_eq!(b.g_eval(0, m, 0.0).unwrap(), 0.0);
        }
        // 1 / ((1/2)(3/2))
        assert_relative_eq!(b.g_eval(0, 0, 1.0).unwrap(), 4.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(b.g_eval(0, 2, 0.25).unwrap(), 2.0, epsilon = 1e-15);
        assert!(b.g_eval(0, 2, 0.0).is_err());
        assert!(b.g_eval(0, 3, 0.5).is_err());
        assert!(b.g_eval(2, 0, 0.5).is_err());
        let b2 = ControlBasis::new(2, 1.0, vec![-0.5, -0.3, -0.2]).unwrap();
        // 1 / ((1/2)(3/2)(5/2))
        assert_relative_eq!(b2.g_eval(0, 0, 1.0).unwrap(), 8.0 / 15.0, epsilon = 1e-15);
    }

    #[test]
    fn invariants_enforced() {
        assert!(matches!(
            ControlBasis::new(1, 1.0, vec![-0.5, -0.5]),
            Err(Error::DegenerateBasis(_))
        ));
        assert!(ControlBasis::new(1, 1.0, vec![-0.5, 0.1]).is_err());
        assert!(ControlBasis::new(1, 1.0, vec![-0.5]).is_err());
    }

    #[test]
    fn log_space_agrees() {
        for m in 0..12 {
            assert_relative_eq!(
                rising_product(-0.37, m, true),
                rising_product(-0.37, m, false),
                max_relative = 1e-13
            );
        }
    }
}
