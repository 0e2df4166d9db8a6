use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;

use super::{dilate, group_compose, group_inverse, KineticPoint, SystemSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CylinderKind {
    UnitTemplate,
    Dilated,
    Translated,
}

/// `z̃ ∘ δ_r(B_1 × … × B_1 × (t_lo, t_hi])`.
///
/// `time_interval` is the template interval before dilation and translation.
#[derive(Clone, Debug, PartialEq)]
pub struct Cylinder {
    pub center: KineticPoint,
    pub radius: f64,
    pub time_interval: (f64, f64),
}

impl Cylinder {
    pub fn new(center: KineticPoint, radius: f64, time_interval: (f64, f64)) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Geometry(format!("radius {radius} must be positive")));
        }
        if !(time_interval.0 < time_interval.1) {
            return Err(Error::Geometry(format!(
                "empty time interval ({}, {}]",
                time_interval.0, time_interval.1
            )));
        }
        Ok(Self {
            center,
            radius,
            time_interval,
        })
    }

    /// Unit-radius cylinder at the origin over `(t_lo, t_hi]`.
    pub fn template(spec: &SystemSpec, t_lo: f64, t_hi: f64) -> Result<Self> {
        Self::new(KineticPoint::origin(spec), 1.0, (t_lo, t_hi))
    }

    /// `Q_1 = B_1 × … × B_1 × (-1, 0]`.
    pub fn unit(spec: &SystemSpec) -> Self {
        Self::template(spec, -1.0, 0.0).expect("unit cylinder is valid")
    }

    pub fn kind(&self) -> CylinderKind {
        let at_origin = self.center.flat().iter().all(|&x| x == 0.0) && self.center.t() == 0.0;
        match (at_origin, self.radius == 1.0) {
            (true, true) => CylinderKind::UnitTemplate,
            (true, false) => CylinderKind::Dilated,
            _ => CylinderKind::Translated,
        }
    }

    /// Time interval actually covered after dilation and translation.
    pub fn actual_time_interval(&self, spec: &SystemSpec) -> (f64, f64) {
        let s = self.radius.powf(2.0 * spec.beta());
        (
            self.center.t() + s * self.time_interval.0,
            self.center.t() + s * self.time_interval.1,
        )
    }

    fn in_template(&self, w: &KineticPoint) -> bool {
        let (lo, hi) = self.time_interval;
        if !(w.t() > lo && w.t() <= hi) {
            return false;
        }
        w.layers().iter().all(|l| l.norm_squared() < 1.0)
    }

    /// Membership via `δ_{1/r}(z̃^{-1} ∘ z)` tested against the template.
    pub fn contains(&self, spec: &SystemSpec, z: &KineticPoint) -> bool {
        let Ok(inv) = group_inverse(spec, &self.center) else {
            return false;
        };
        let Ok(rel) = group_compose(spec, &inv, z) else {
            return false;
        };
        let Ok(w) = dilate(spec, 1.0 / self.radius, &rel) else {
            return false;
        };
        self.in_template(&w)
    }

    /// Axis-aligned box in internal coordinates containing the cylinder's spatial section.
    ///
    /// The centre is transported along `exp(sB) x̃` over the dilated time window; the curve is
    /// polynomial in `s` and is sampled densely, then padded by the layer radii.
    pub fn bounding_box(&self, spec: &SystemSpec) -> Vec<(f64, f64)> {
        let scale = self.radius.powf(2.0 * spec.beta());
        let (lo, hi) = (scale * self.time_interval.0, scale * self.time_interval.1);
        let x0 = self.center.flat();
        let mut bbox = vec![(f64::INFINITY, f64::NEG_INFINITY); spec.n()];
        let moving = x0.iter().any(|&v| v != 0.0);
        let samples = if moving { 129 } else { 1 };
        for q in 0..samples {
            let s = lo + (hi - lo) * q as f64 / (samples.max(2) - 1) as f64;
            let c = if moving {
                spec.exp_tb_internal(s) * &x0
            } else {
                x0.clone()
            };
            for (k, b) in bbox.iter_mut().enumerate() {
                b.0 = b.0.min(c[k]);
                b.1 = b.1.max(c[k]);
            }
        }
        for i in 0..=spec.kappa() {
            let rad = self.radius.powf(1.0 + 2.0 * i as f64 * spec.beta());
            for b in &mut bbox[spec.offset(i)..spec.offset(i) + spec.dims()[i]] {
                b.0 -= rad;
                b.1 += rad;
            }
        }
        bbox
    }

    /// `n` points uniform on the template, pushed forward by `z̃ ∘ δ_r`. Deterministic per seed.
    pub fn sample(&self, spec: &SystemSpec, n: usize, seed: u64) -> Vec<KineticPoint> {
        let mut r = rng::stream(seed, "cylinder-sample");
        let (lo, hi) = self.time_interval;
        (0..n)
            .map(|_| {
                let layers: Vec<DVector<f64>> = spec
                    .dims()
                    .iter()
                    .map(|&d| sample_ball(&mut r, d))
                    .collect();
                // (lo, hi]: reflect the half-open [0, 1) draw
                let t = hi - (hi - lo) * r.random::<f64>();
                let w = KineticPoint::new(spec, layers, t).expect("shapes follow spec");
                let scaled = dilate(spec, self.radius, &w).expect("radius validated");
                group_compose(spec, &self.center, &scaled).expect("shapes follow spec")
            })
            .collect()
    }
}

/// Uniform point in the open unit ball of `R^d`.
pub(crate) fn sample_ball<R: Rng>(r: &mut R, d: usize) -> DVector<f64> {
    if d <= 6 {
        loop {
            let v = DVector::from_fn(d, |_, _| 2.0 * r.random::<f64>() - 1.0);
            if v.norm_squared() < 1.0 {
                return v;
            }
        }
    }
    loop {
        let g = DVector::from_fn(d, |_, _| r.sample::<f64, _>(StandardNormal));
        let norm = g.norm();
        if norm > 0.0 {
            let rad = r.random::<f64>().powf(1.0 / d as f64);
            let v = g * (rad / norm);
            if v.norm_squared() < 1.0 {
                return v;
            }
        }
    }
}

/// The three disjoint-in-time cylinders `Q^+`, `Q^0`, `Q^-`, all unit radius at the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct CylinderLayout {
    pub plus: Cylinder,
    pub zero: Cylinder,
    pub minus: Cylinder,
}

impl CylinderLayout {
    /// `Q^+ = (-1, 0]`, `Q^0 = (-3, -2]`, `Q^- = (-5, -4]`.
    pub fn standard(spec: &SystemSpec) -> Self {
        Self::with_gaps(spec, 1.0, 1.0).expect("standard layout is valid")
    }

    /// Unit-length windows stacked downward from `t = 0` with the given gaps.
    pub fn with_gaps(spec: &SystemSpec, gap_plus_zero: f64, gap_zero_minus: f64) -> Result<Self> {
        if !(gap_plus_zero > 0.0 && gap_zero_minus > 0.0) {
            return Err(Error::Geometry("cylinder gaps must be positive".into()));
        }
        let z_hi = -1.0 - gap_plus_zero;
        let m_hi = z_hi - 1.0 - gap_zero_minus;
        Ok(Self {
            plus: Cylinder::unit(spec),
            zero: Cylinder::template(spec, z_hi - 1.0, z_hi)?,
            minus: Cylinder::template(spec, m_hi - 1.0, m_hi)?,
        })
    }

    /// `(t_lo, t_hi]` spanning all three cylinders.
    pub fn time_span(&self, spec: &SystemSpec) -> (f64, f64) {
        (
            self.minus.actual_time_interval(spec).0,
            self.plus.actual_time_interval(spec).1,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership_basics() {
        let s = SystemSpec::chain(1, 1, 1.0, 1.0).unwrap();
        let q = Cylinder::unit(&s);
        assert_eq!(q.kind(), CylinderKind::UnitTemplate);
        let mut z = KineticPoint::from_display(&s, &[0.0, 0.0, -0.5]).unwrap();
        assert!(q.contains(&s, &z));
        z = KineticPoint::from_display(&s, &[0.0, 0.0, 0.1]).unwrap();
        assert!(!q.contains(&s, &z));
        z = KineticPoint::from_display(&s, &[0.0, 0.0, 0.0]).unwrap();
        assert!(q.contains(&s, &z));
        z = KineticPoint::from_display(&s, &[0.0, 0.0, -1.0]).unwrap();
        assert!(!q.contains(&s, &z));
    }

    #[test]
    fn samples_land_inside() {
        let s = SystemSpec::chain(2, 2, 1.0, 1.0).unwrap();
        let center = KineticPoint::from_display(&s, &[0.3, -0.2, 1.0, 0.5, 0.1, 0.2, 2.0]).unwrap();
        let q = Cylinder::new(center, 0.7, (-1.0, 0.0)).unwrap();
        assert_eq!(q.kind(), CylinderKind::Translated);
        let pts = q.sample(&s, 2000, 11);
        assert!(pts.iter().all(|z| q.contains(&s, z)));
        assert_eq!(pts, q.sample(&s, 2000, 11));
    }

    #[test]
    fn high_dimensional_ball_sampler() {
        let mut r = rng::stream(3, "t");
        for _ in 0..200 {
            assert!(sample_ball(&mut r, 9).norm() < 1.0);
        }
    }

    #[test]
    fn layout_is_disjoint() {
        let s = SystemSpec::chain(1, 1, 1.0, 1.0).unwrap();
        let l = CylinderLayout::standard(&s);
        assert_eq!(l.zero.time_interval, (-3.0, -2.0));
        assert_eq!(l.minus.time_interval, (-5.0, -4.0));
        assert_eq!(l.time_span(&s), (-5.0, 0.0));
    }
}
