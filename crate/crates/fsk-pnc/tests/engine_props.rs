//! Property tests for the Gaussian component algebra over randomly drawn
//! inputs: the pointwise product and substitution laws, normalization
//! idempotence, and moment preservation.

use fsk_pnc::gaussian::{log_sum_exp, GaussianComponent, Mixture};
use fsk_pnc::linalg::{C64, CMatrix2, Complex2};
use proptest::prelude::*;

fn c64() -> impl Strategy<Value = C64> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(re, im)| C64::new(re, im))
}

fn vec2() -> impl Strategy<Value = Complex2> {
    (c64(), c64()).prop_map(|(a, b)| Complex2(a, b))
}

/// Hermitian positive definite precision built as `A^* A + eps I`.
fn precision() -> impl Strategy<Value = CMatrix2> {
    (c64(), c64(), c64(), c64(), 0.05..1.0f64).prop_map(|(a, b, c, d, eps)| {
        let m = CMatrix2::new(a, b, c, d);
        (m.adjoint().mul_mat(&m) + CMatrix2::from_re(eps, 0.0, 0.0, eps)).hermitize()
    })
}

fn component() -> impl Strategy<Value = GaussianComponent> {
    (precision(), vec2(), -3.0..3.0f64).prop_map(|(p, e, w)| GaussianComponent::new(p, e, w))
}

fn rotation() -> impl Strategy<Value = CMatrix2> {
    (-3.2..3.2f64, -3.2..3.2f64)
        .prop_map(|(pa, pb)| CMatrix2::diag(C64::from_polar(1.0, pa), C64::from_polar(1.0, pb)))
}

proptest! {
    #[test]
    fn product_law_holds_pointwise(a in component(), b in component(), h in vec2()) {
        let ab = a.combine(&b);
        let expect = a.log_value_at(&h) + b.log_value_at(&h);
        let got = ab.log_value_at(&h);
        prop_assert!((got - expect).abs() <= 1e-9 * expect.abs().max(1.0));
    }

    #[test]
    fn pullback_is_composition_with_rotation(c in component(), g in rotation(), h in vec2()) {
        let pulled = c.pullback(&g).unwrap();
        let expect = c.log_value_at(&g.mul_vec(&h));
        prop_assert!((pulled.log_value_at(&h) - expect).abs() <= 1e-9 * expect.abs().max(1.0));
    }

    #[test]
    fn transforms_roundtrip(c in component(), g in rotation()) {
        let back = c.pullback(&g).unwrap().pushforward(&g).unwrap();
        prop_assert!((back.info.0 - c.info.0).norm() <= 1e-10);
        prop_assert!((back.info.1 - c.info.1).norm() <= 1e-10);
        prop_assert!((back.precision.b - c.precision.b).norm() <= 1e-10);
        prop_assert_eq!(back.logw, c.logw);
    }

    #[test]
    fn normalize_is_idempotent_and_accumulates(comps in prop::collection::vec(component(), 1..8)) {
        let mut m = Mixture::new(comps);
        let n1 = m.normalize().unwrap();
        let n2 = m.normalize().unwrap();
        prop_assert!(n1.is_finite());
        prop_assert!(n2.abs() <= 1e-10);
        let logws: Vec<f64> = m.components.iter().map(|c| c.logw).collect();
        prop_assert!(log_sum_exp(&logws).abs() <= 1e-10);
    }

    #[test]
    fn moment_match_preserves_mass_and_mean(comps in prop::collection::vec(component(), 1..6)) {
        let m = Mixture::new(comps.clone());
        let matched = m.moment_match().unwrap();
        let masses: Vec<f64> = comps.iter().map(|c| c.integrate().unwrap()).collect();
        let total = log_sum_exp(&masses);
        prop_assert!((matched.integrate().unwrap() - total).abs() <= 1e-9 * total.abs().max(1.0));

        let mut mean = Complex2::zero();
        for (c, &mass) in comps.iter().zip(&masses) {
            mean = mean + c.mean().unwrap().scale((mass - total).exp());
        }
        let got = matched.mean().unwrap();
        prop_assert!((got.0 - mean.0).norm() <= 1e-8 * (1.0 + mean.0.norm()));
        prop_assert!((got.1 - mean.1).norm() <= 1e-8 * (1.0 + mean.1.norm()));
    }

    #[test]
    fn curtail_keeps_budget_and_normalizes(comps in prop::collection::vec(component(), 1..10), gmr in 1usize..6) {
        let mut m = Mixture::new(comps);
        let before = m.len();
        m.curtail(gmr).unwrap();
        prop_assert_eq!(m.len(), before.min(gmr));
        let logws: Vec<f64> = m.components.iter().map(|c| c.logw).collect();
        prop_assert!(log_sum_exp(&logws).abs() <= 1e-10);
    }
}
