use langevin_decay::fporacle::build_grid_operator;
use langevin_decay::model::{Model, TestFunction, Univariate};
use langevin_decay::rates::{DecayEnvelope, Preset};
use proptest::prelude::*;

fn univariate() -> impl Strategy<Value = Univariate> {
    prop_oneof![
        Just(Univariate::One),
        prop::collection::vec(-2.0..2.0f64, 1..4).prop_map(Univariate::Poly),
        (0.2..3.0f64).prop_map(Univariate::Tanh),
        (0.1..3.0f64, -3.0..3.0f64).prop_map(|(freq, phase)| Univariate::Sin { freq, phase }),
        (-1.0..1.0f64, 0.3..2.0f64).prop_map(|(center, width)| Univariate::Gauss { center, width }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradients_match_central_differences(
        u in univariate(),
        v in univariate(),
        x in -2.0..2.0f64,
        y in -2.0..2.0f64,
    ) {
        let f = TestFunction::product_1d(u, v);
        let h = 1e-5;
        let (mut gx, mut gy) = ([0.0], [0.0]);
        f.grad_x_into(&[x], &[y], &mut gx);
        f.grad_y_into(&[x], &[y], &mut gy);
        let fx = (f.value(&[x + h], &[y]) - f.value(&[x - h], &[y])) / (2.0 * h);
        let fy = (f.value(&[x], &[y + h]) - f.value(&[x], &[y - h])) / (2.0 * h);
        prop_assert!((gx[0] - fx).abs() < 1e-6 * (1.0 + fx.abs()), "{} vs {}", gx[0], fx);
        prop_assert!((gy[0] - fy).abs() < 1e-6 * (1.0 + fy.abs()), "{} vs {}", gy[0], fy);
    }

    #[test]
    fn stretched_envelope_is_decreasing(delta in 0.2..1.0f64, eps in 0.2..1.0f64, c2 in 0.1..10.0f64) {
        let preset = Preset::parse("stretched", &[delta, eps], 1).unwrap();
        let env = DecayEnvelope::new(preset.shape().unwrap(), 1.0, c2).unwrap();
        let mut last = f64::INFINITY;
        for k in 0..40 {
            let t = 10f64.powf(k as f64 * 0.25);
            let xi = env.xi(t);
            prop_assert!(xi.is_finite() && xi >= 0.0 && xi <= last, "t = {t}: {xi} after {last}");
            last = xi;
        }
    }

    #[test]
    fn polylog_envelope_is_decreasing(p in 2.0..20.0f64, q in 2.0..20.0f64) {
        let preset = Preset::parse("polylog", &[p, q], 1).unwrap();
        let env = DecayEnvelope::new(preset.shape().unwrap(), 1.0, 1.0).unwrap();
        let mut last = f64::INFINITY;
        for k in 0..40 {
            let t = 10f64.powf(k as f64 * 0.25);
            let l = env.log_inv_xi(t);
            prop_assert!(l.is_finite() && l >= -1e-12 && -l <= last, "t = {t}: {l}");
            last = -l;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn grid_operators_keep_structure(s in 0.2..2.0f64, n in 9usize..33, seed in 0u64..1000) {
        let m = Model::variable_sigma(s).unwrap();
        let gs = build_grid_operator(&m, None, n, n + 2).unwrap();
        let inv = gs.invariants(seed);
        prop_assert!(inv.hold(1e-10), "{inv:?}");
    }
}
