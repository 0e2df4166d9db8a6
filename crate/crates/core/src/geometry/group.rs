use crate::error::{Error, Result};

use super::{KineticPoint, SystemSpec};

fn check(spec: &SystemSpec, z: &KineticPoint) -> Result<()> {
    if z.layers().len() != spec.kappa() + 1 {
        return Err(Error::DimensionMismatch {
            expected: spec.kappa() + 1,
            got: z.layers().len(),
        });
    }
    for (l, &d) in z.layers().iter().zip(spec.dims()) {
        if l.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: l.len(),
            });
        }
    }
    Ok(())
}

/// `z̃ ∘ z = (x + exp(tB) x̃, t + t̃)`.
pub fn group_compose(
    spec: &SystemSpec,
    z_tilde: &KineticPoint,
    z: &KineticPoint,
) -> Result<KineticPoint> {
    check(spec, z_tilde)?;
    check(spec, z)?;
    let x = z.flat() + spec.exp_tb_internal(z.t()) * z_tilde.flat();
    KineticPoint::from_flat(spec, &x, z.t() + z_tilde.t())
}

/// `z^{-1} = (-exp(-tB) x, -t)`.
pub fn group_inverse(spec: &SystemSpec, z: &KineticPoint) -> Result<KineticPoint> {
    check(spec, z)?;
    let x = -(spec.exp_tb_internal(-z.t()) * z.flat());
    KineticPoint::from_flat(spec, &x, -z.t())
}

/// `δ_r`: layer `i` scaled by `r^{1+2iβ}`, time by `r^{2β}`.
pub fn dilate(spec: &SystemSpec, r: f64, z: &KineticPoint) -> Result<KineticPoint> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameters(format!(
            "dilation factor r = {r} must be positive"
        )));
    }
    check(spec, z)?;
    let beta = spec.beta();
    let layers = z
        .layers()
        .iter()
        .enumerate()
        .map(|(i, l)| l * r.powf(1.0 + 2.0 * i as f64 * beta))
        .collect();
    KineticPoint::new(spec, layers, z.t() * r.powf(2.0 * beta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(spec: &SystemSpec, c: &[f64]) -> KineticPoint {
        KineticPoint::from_display(spec, c).unwrap()
    }

    #[test]
    fn compose_worked_example() {
        let s = SystemSpec::chain(1, 1, 1.0, 1.0).unwrap();
        let out = group_compose(&s, &p(&s, &[1., 2., 3.]), &p(&s, &[4., 5., 6.])).unwrap();
        assert_eq!(out.to_display(), vec![17.0, 7.0, 9.0]);
        let o = KineticPoint::origin(&s);
        let z = p(&s, &[4., 5., 6.]);
        assert_eq!(group_compose(&s, &o, &z).unwrap(), z);
    }

    #[test]
    fn inverse_cancels() {
        let s = SystemSpec::chain(1, 1, 1.0, 1.0).unwrap();
        let z = p(&s, &[4., 5., 6.]);
        let zi = group_inverse(&s, &z).unwrap();
        // x' = -exp(-6B)(4,5) = -(4 - 30, 5) = (26, -5)
        assert_eq!(zi.to_display(), vec![26.0, -5.0, -6.0]);
        assert!(
            group_compose(&s, &z, &zi)
                .unwrap()
                .max_abs_diff(&KineticPoint::origin(&s))
                == 0.0
        );
        assert_eq!(
            group_inverse(&s, &KineticPoint::origin(&s)).unwrap(),
            KineticPoint::origin(&s)
        );
    }

    #[test]
    fn dilation_exponents() {
        let s = SystemSpec::chain(1, 1, 1.0, 1.0).unwrap();
        let out = dilate(&s, 2.0, &p(&s, &[1., 1., 1.])).unwrap();
        assert_eq!(out.to_display(), vec![8.0, 2.0, 4.0]);
        assert!(dilate(&s, 0.0, &out).is_err());
        assert!(dilate(&s, -1.0, &out).is_err());
    }
}
