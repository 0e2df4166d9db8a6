use hypokinetic::geometry::{Cylinder, CylinderLayout, SystemSpec};
use hypokinetic::lab::coefficient::lattice_for;
use hypokinetic::lab::*;
use hypokinetic::poincare::*;
use hypokinetic::Error;

fn spec1() -> SystemSpec {
    SystemSpec::chain(1, 1, 1.0, 2.0).unwrap()
}

/// Snapshots at time-cell centres covering (-5, 0].
fn times(tau: f64) -> Vec<f64> {
    let n = (5.0 / tau).round() as usize;
    (0..n).map(|k| -5.0 + (k as f64 + 0.5) * tau).collect()
}

fn field(spec: &SystemSpec, f: impl Fn(&[f64], f64) -> f64) -> GridField {
    let grid = PhaseGrid::layered(spec, &[4.0, 2.0], &[32, 16]).unwrap();
    GridField::from_fn(spec, grid, times(0.05), 0.05, f).unwrap()
}

fn ambient(spec: &SystemSpec) -> Ambient {
    Ambient::new(spec, vec![4.0, 2.0], (-5.0, 0.0)).unwrap()
}

fn smooth(x: &[f64], t: f64) -> f64 {
    (-(x[0] - 0.4).powi(2) - 2.0 * (x[1] + 0.2).powi(2)).exp() * (1.0 + 0.1 * t)
        + 0.2 * (t + 2.0).sin().max(0.0)
}

#[test]
fn constants_annihilate_both_sides() {
    let spec = spec1();
    let l = CylinderLayout::standard(&spec);
    for c in [0.0, 0.3, 1.7, 1e6] {
        let f = field(&spec, |_, _| c);
        assert_eq!(past_average(&f, &l.minus).unwrap(), c);
        assert_eq!(lhs_poincare(&f, &l.plus, &l.minus, 1.0).unwrap(), 0.0);
        assert_eq!(rhs_poincare(&f, &ambient(&spec), 1.0).unwrap(), 0.0);
        let rep = poincare_report(&f, &l.plus, &l.minus, &ambient(&spec), 2.0, "constant").unwrap();
        assert_eq!(rep.ratio, None);
    }
}

#[test]
fn time_indicator_fixtures() {
    let spec = spec1();
    let l = CylinderLayout::standard(&spec);
    let f = field(&spec, |_, t| if t <= -4.0 { 1.0 } else { 0.0 });
    assert_eq!(past_average(&f, &l.minus).unwrap(), 1.0);
    assert_eq!(lhs_poincare(&f, &l.plus, &l.minus, 1.0).unwrap(), 0.0);
    assert_eq!(rhs_poincare(&f, &ambient(&spec), 1.0).unwrap(), 0.0);
    // half the past window
    let tau = 0.05;
    let g = field(&spec, |_, t| if t <= -4.5 { 1.0 } else { 0.0 });
    assert!((past_average(&g, &l.minus).unwrap() - 0.5).abs() <= tau);
    // linear in time: the midpoint value
    let h = field(&spec, |_, t| 3.0 + 2.0 * t);
    assert!((past_average(&h, &l.minus).unwrap() - (3.0 + 2.0 * -4.5)).abs() <= 1e-12);
}

#[test]
fn shift_invariance() {
    let spec = spec1();
    let l = CylinderLayout::standard(&spec);
    let f = field(&spec, smooth);
    let lhs = lhs_poincare(&f, &l.plus, &l.minus, 1.0).unwrap();
    let rhs = rhs_poincare(&f, &ambient(&spec), 1.0).unwrap();
    assert!(lhs > 0.0 && rhs > 0.0);
    for c in [0.5, 3.0, 10.0] {
        let g = field(&spec, |x, t| smooth(x, t) + c);
        assert!((lhs_poincare(&g, &l.plus, &l.minus, 1.0).unwrap() - lhs).abs() <= 1e-12);
        assert!((rhs_poincare(&g, &ambient(&spec), 1.0).unwrap() - rhs).abs() <= 1e-12);
    }
}

#[test]
fn shrinking_the_future_cylinder() {
    let spec = spec1();
    let l = CylinderLayout::standard(&spec);
    let f = field(&spec, smooth);
    let full = lhs_poincare(&f, &l.plus, &l.minus, 1.0).unwrap();
    let mut prev = full;
    for r in [0.95, 0.9, 0.8, 0.7] {
        let small = Cylinder::new(l.plus.center.clone(), r, (-1.0, 0.0)).unwrap();
        let v = lhs_poincare(&f, &small, &l.minus, 1.0).unwrap();
        assert!(v <= prev, "r {r}: {v} > {prev}");
        prev = v;
    }
}

#[test]
fn dilation_scales_the_ratio() {
    // f_r = f ∘ δ_{1/r}; lhs gains r^Q, rhs gains r^{Q-1}, with Q = 1 + 3 + 2
    let spec = spec1();
    let r: f64 = 1.5;
    let base = field(&spec, smooth);
    let l = CylinderLayout::standard(&spec);
    let rep = poincare_report(&base, &l.plus, &l.minus, &ambient(&spec), 1.0, "smooth").unwrap();
    let grid = PhaseGrid::layered(&spec, &[4.0 * r, 2.0 * r.powi(3)], &[32, 16]).unwrap();
    let tau = 0.05 * r * r;
    let ts: Vec<f64> = times(0.05).iter().map(|t| t * r * r).collect();
    let scaled = GridField::from_fn(&spec, grid, ts, tau, |x, t| {
        smooth(&[x[0] / r, x[1] / r.powi(3)], t / (r * r))
    })
    .unwrap();
    let dil = |c: &Cylinder| Cylinder::new(c.center.clone(), r, c.time_interval).unwrap();
    let amb = Ambient::new(&spec, vec![4.0 * r, 2.0 * r.powi(3)], (-5.0 * r * r, 0.0)).unwrap();
    let rep_r = poincare_report(
        &scaled,
        &dil(&l.plus),
        &dil(&l.minus),
        &amb,
        1.0,
        "smooth-dilated",
    )
    .unwrap();
    let q = 6.0;
    assert!((rep_r.lhs / (rep.lhs * r.powf(q)) - 1.0).abs() < 0.05);
    assert!((rep_r.rhs / (rep.rhs * r.powf(q - 1.0)) - 1.0).abs() < 0.05);
    let predicted = rep.ratio.unwrap() * r;
    assert!(
        (rep_r.ratio.unwrap() / predicted - 1.0).abs() < 0.05,
        "{} vs {predicted}",
        rep_r.ratio.unwrap()
    );
}

#[test]
fn checkerboard_rhs_within_ellipticity() {
    let spec = spec1();
    let f = field(&spec, smooth);
    let lat = lattice_for(&f.grid, &[8, 4]).unwrap();
    let ck = rough_coefficient_sampler(&spec, &lat, CoefficientPreset::Checkerboard, 0)
        .unwrap()
        .on_grid(&f.grid);
    let id = rhs_poincare(&f, &ambient(&spec), 1.0).unwrap();
    let rough = rhs_poincare(
        &f.clone().with_coefficient(ck).unwrap(),
        &ambient(&spec),
        1.0,
    )
    .unwrap();
    let lambda = spec.lambda();
    assert!(
        rough <= lambda.sqrt() * id * (1.0 + 1e-12) && rough >= id / lambda.sqrt() * (1.0 - 1e-12)
    );
    assert!(rough <= lambda * id && rough >= id / lambda);
}

#[test]
fn source_adds_its_norm() {
    let spec = spec1();
    let f = field(&spec, |_, _| 1.0);
    let s = vec![0.25; f.grid.len()];
    let with = f.clone().with_source(s).unwrap();
    let amb = ambient(&spec);
    let rhs = rhs_poincare(&with, &amb, 1.0).unwrap();
    let cells = (0..with.grid.len())
        .filter(|&c| {
            let x = with.grid.center(c);
            x[0].abs() < 4.0 && x[1].abs() < 2.0
        })
        .count();
    let expect = 0.25 * cells as f64 * with.grid.cell_volume() * 5.0;
    assert!((rhs - expect).abs() <= 1e-9 * expect, "{rhs} vs {expect}");
}

#[test]
fn geometry_errors() {
    let spec = spec1();
    let f = field(&spec, smooth);
    let l = CylinderLayout::standard(&spec);
    let late = Cylinder::template(&spec, 1.0, 2.0).unwrap();
    assert!(matches!(past_average(&f, &late), Err(Error::Geometry(_))));
    let wide = Cylinder::new(l.minus.center.clone(), 3.0, (-0.5, 0.0)).unwrap();
    assert!(matches!(
        lhs_poincare(&f, &wide, &l.minus, 1.0),
        Err(Error::Geometry(_))
    ));
    let big = Ambient::new(&spec, vec![5.0, 2.0], (-5.0, 0.0)).unwrap();
    assert!(matches!(
        rhs_poincare(&f, &big, 1.0),
        Err(Error::Geometry(_))
    ));
}

#[test]
fn ensemble_smoke_and_determinism() {
    let spec = SystemSpec::chain(1, 1, 1.0, 1.0).unwrap();
    let mut cfg = EnsembleConfig::desk(5, 1.0, 4);
    cfg.p = vec![1.0, 2.0];
    let a = ensemble_estimate(&spec, &cfg).unwrap();
    assert_eq!(a.failed, 0);
    assert_eq!(a.runs.len(), 5);
    for run in &a.runs {
        for rep in &run.reports {
            assert!(rep.lhs >= 0.0 && rep.rhs > RHS_FLOOR);
            assert!(rep.ratio.unwrap().is_finite());
        }
    }
    assert!(a.max_ratio(1.0).is_some() && a.max_ratio(2.0).is_some());
    assert_eq!(a, ensemble_estimate(&spec, &cfg).unwrap());
    cfg.ratio_ceiling = Some(0.0);
    let flagged = ensemble_estimate(&spec, &cfg).unwrap();
    let positive = a
        .runs
        .iter()
        .filter(|r| r.reports[0].ratio.unwrap() > 0.0)
        .count();
    assert_eq!(flagged.per_p[0].flagged.len(), positive);
}

#[test]
fn ensemble_second_order_chain() {
    let spec = SystemSpec::chain(2, 1, 1.0, 1.0).unwrap();
    let cfg = EnsembleConfig {
        cells: vec![16, 12, 8],
        lattice: vec![4, 3, 2],
        ambient_radii: Some(vec![4.0, 2.0, 2.0]),
        ..EnsembleConfig::desk(2, 2.0, 6)
    };
    let s = ensemble_estimate(&spec, &cfg).unwrap();
    assert_eq!(s.failed, 0);
    assert!(s
        .runs
        .iter()
        .all(|r| r.reports[0].ratio.is_some_and(f64::is_finite)));
}

#[test]
fn fractional_case_is_unsupported() {
    let spec = SystemSpec::chain(1, 1, 0.5, 1.0).unwrap();
    assert!(matches!(
        ensemble_estimate(&spec, &EnsembleConfig::desk(1, 1.0, 0)),
        Err(Error::Unsupported(_))
    ));
}
