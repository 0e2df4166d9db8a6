#![allow(dead_code)]

use hypokinetic::geometry::{KineticPoint, SystemSpec};
use hypokinetic::rng::StreamRng;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Random full-row-rank blocks for the given dims, with `Λ` set to cover their norm.
pub fn random_spec(r: &mut StreamRng, dims: &[usize]) -> SystemSpec {
    let kappa = dims.len() - 1;
    loop {
        let blocks: Vec<DMatrix<f64>> = (1..=kappa)
            .map(|i| DMatrix::from_fn(dims[i], dims[i - 1], |_, _| r.random_range(-1.5..1.5)))
            .collect();
        let norm = blocks
            .iter()
            .map(|b| b.clone().svd(false, false).singular_values.max())
            .fold(0.0, f64::max);
        let lambda = norm.max(1.0) * 1.01;
        if let Ok(s) = SystemSpec::new(kappa, 1.0, dims.to_vec(), blocks.clone(), lambda) {
            let conditioned = blocks.iter().all(|b| {
                let sv = b.clone().svd(false, false).singular_values;
                sv.min() > 0.2 * sv.max()
            });
            if conditioned {
                return s;
            }
        }
    }
}

pub fn random_point(r: &mut StreamRng, spec: &SystemSpec, scale: f64) -> KineticPoint {
    let x = DVector::from_fn(spec.n(), |_, _| r.random_range(-scale..scale));
    KineticPoint::from_flat(spec, &x, r.random_range(-scale..scale)).unwrap()
}

/// `κ+1` distinct exponents uniform in `(-1, 0)` with pairwise gap at least `min_gap`.
pub fn random_alphas(r: &mut StreamRng, kappa: usize, min_gap: f64) -> Vec<f64> {
    loop {
        let a: Vec<f64> = (0..=kappa)
            .map(|_| -r.random_range(0.0..1.0f64).max(1e-6))
            .collect();
        let ok = a
            .iter()
            .enumerate()
            .all(|(i, x)| a[i + 1..].iter().all(|y| (x - y).abs() >= min_gap));
        if ok && a.iter().all(|x| *x > -1.0 && *x < 0.0) {
            return a;
        }
    }
}

/// Five-point central difference of `f` at 0.
pub fn d5(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (-f(2.0 * h) + 8.0 * f(h) - 8.0 * f(-h) + f(-2.0 * h)) / (12.0 * h)
}
