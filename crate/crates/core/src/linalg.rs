//! `f64` helpers built on nalgebra.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative cutoff below which singular values are treated as zero.
pub const PINV_RTOL: f64 = 1e-12;

/// Moore–Penrose pseudo-inverse via SVD, singular values below `PINV_RTOL · σ_max` dropped.
pub fn pinv(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = PINV_RTOL * smax;
    svd.pseudo_inverse(eps)
        .map_err(|e| Error::Singular(e.to_string()))
}

/// 2-norm condition number `σ_max / σ_min`.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let smin = sv.min();
    if smin == 0.0 {
        f64::INFINITY
    } else {
        sv.max() / smin
    }
}

pub fn min_singular_value(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.min()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_wide_matrix_is_right_inverse() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, 1.0]);
        let g = pinv(&a).unwrap();
        let r = &a * &g - DMatrix::identity(2, 2);
        assert!(r.amax() < 1e-14);
        let p = &g * &a;
        assert!((&p * &p - &p).amax() < 1e-14);
    }

    #[test]
    fn condition_of_identity() {
        assert_eq!(condition_number(&DMatrix::identity(3, 3)), 1.0);
    }
}
