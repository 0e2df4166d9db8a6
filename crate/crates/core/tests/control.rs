use hypokinetic::control::{default_alphas, ControlBasis};
use hypokinetic::quadrature::SplitRule;
use proptest::prelude::*;

fn basis(kappa: usize, seed_alpha: f64) -> ControlBasis {
    let spread = 0.9 / (kappa as f64 + 1.0);
    let alphas: Vec<f64> = (0..=kappa)
        .map(|i| -0.95 + seed_alpha * 0.04 + i as f64 * spread)
        .collect();
    ControlBasis::new(kappa, 1.0, alphas).unwrap()
}

proptest! {
    #[test]
    fn derivative_consistency(kappa in 1usize..5, sa in 0.0f64..1.0, s in 0.1f64..0.9, i in 0usize..5, m in 0usize..5) {
        let b = basis(kappa, sa);
        let i = i % (kappa + 1);
        let m = m % (kappa + 1);
        let h = 1e-6;
        let fd = (b.g_eval(i, m, s + h).unwrap() - b.g_eval(i, m, s - h).unwrap()) / (2.0 * h);
        let exact = b.g_eval(i, m + 1, s).unwrap();
        prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs(), "{fd} vs {exact}");
    }

    #[test]
    fn positivity(kappa in 1usize..5, sa in 0.0f64..1.0, s in 1e-6f64..1.0) {
        let b = basis(kappa, sa);
        for i in 0..=kappa {
            prop_assert!(b.g_eval(i, 0, s).unwrap() > 0.0);
        }
    }

    #[test]
    fn top_derivative_is_power(kappa in 1usize..5, sa in 0.0f64..1.0, s in 1e-6f64..1.0) {
        let b = basis(kappa, sa);
        for i in 0..=kappa {
            prop_assert_eq!(b.g_eval(i, kappa + 1, s).unwrap(), s.powf(b.alphas()[i]));
        }
    }
}

#[test]
fn top_derivative_integrates_to_reciprocal() {
    for kappa in 1..=4 {
        let b = ControlBasis::balanced(kappa, 1.0).unwrap();
        for i in 0..=kappa {
            let a = b.alphas()[i];
            let q = SplitRule::new(a, 0.5, 12).unwrap();
            let v = q.integrate(|s| b.g_eval(i, kappa + 1, s).unwrap().abs());
            let exact = 1.0 / (1.0 + a);
            assert!(v.is_finite());
            assert!((v - exact).abs() <= 1e-10 * exact, "{v} vs {exact}");
        }
    }
}

#[test]
fn fractional_defaults() {
    for &beta in &[0.25, 0.5, 0.9] {
        let b = ControlBasis::balanced(3, beta).unwrap();
        let eps = b.epsilon();
        assert!(eps > 0.0 && eps < 1.0 - beta);
        let centre = 1.0 / (2.0 + beta + eps) - 1.0;
        let mean = b.alphas().iter().sum::<f64>() / 4.0;
        assert!((mean - centre).abs() < 1e-14);
    }
    assert!(default_alphas(2, 1.0, 0.0, -0.01).is_err());
}

#[test]
fn deep_chain_uses_stable_products() {
    let b = ControlBasis::balanced(10, 1.0).unwrap();
    let g = b.g_eval(0, 0, 1.0).unwrap();
    let direct: f64 = (1..=11).map(|k| k as f64 + b.alphas()[0]).product();
    assert!((g * direct - 1.0).abs() < 1e-13);
}
