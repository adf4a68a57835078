use proptest::prelude::*;
use twoway_core::boundary::{apply_sequence, secure_with_some_sequence, Step, StepSequence};
use twoway_core::channel::ChannelParams;
use twoway_core::decoy::{rate_at, Scheme, SchemeConfig};
use twoway_core::edp::{b_step, p_step, BellDiagonal};
use twoway_core::fluctuations::{finite_rate, ExperimentPlan};
use twoway_core::oracle::{enumerate_b, enumerate_p};

prop_compose! {
    fn bell()(w in prop::array::uniform4(0.0f64..1.0).prop_filter("non-zero", |w| w.iter().sum::<f64>() > 1e-3)) -> BellDiagonal {
        let s: f64 = w.iter().sum();
        BellDiagonal::from_array([w[0] / s, w[1] / s, w[2] / s, w[3] / s])
    }
}

fn seq() -> impl Strategy<Value = StepSequence> {
    prop::collection::vec(prop_oneof![Just(Step::B), Just(Step::P)], 0..8).prop_map(StepSequence)
}

proptest! {
    #[test]
    fn b_step_normalized_and_bit_identity(c in bell(), t in bell()) {
        let (ps, out) = b_step(&c, &t).unwrap();
        let (rc, rt) = (c.rates(), t.rates());
        prop_assert!((ps - (rc.delta_b * rt.delta_b + (1.0 - rc.delta_b) * (1.0 - rt.delta_b))).abs() < 1e-12);
        prop_assert!((out.total() - 1.0).abs() < 1e-12);
        prop_assert!((out.rates().delta_b - rc.delta_b * rt.delta_b / ps).abs() < 1e-12);
    }

    #[test]
    fn p_step_normalized(s in bell()) {
        let out = p_step(&s);
        prop_assert!((out.total() - 1.0).abs() < 1e-12);
        prop_assert!(out.to_array().iter().all(|&q| q >= 0.0));
    }

    #[test]
    fn enumerations_agree(c in bell(), t in bell()) {
        let (pe, oe) = enumerate_b(&c, &t);
        let (pa, oa) = b_step(&c, &t).unwrap();
        prop_assert!((pe - pa).abs() < 1e-12);
        for (x, y) in oe.to_array().iter().zip(oa.to_array()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in enumerate_p(&c).to_array().iter().zip(p_step(&c).to_array()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn sequences_keep_normalization(s in bell(), q in seq()) {
        if let Ok((out, y)) = apply_sequence(&s, &q) {
            prop_assert!((out.total() - 1.0).abs() < 1e-12);
            prop_assert!(y > 0.0 && y <= 1.0);
        }
    }

    #[test]
    fn boundary_monotone_in_steps(db in 0.0f64..0.25, frac in 0.0f64..1.0, n in 0usize..6) {
        let dp = db + frac * (0.5 - 2.0 * db);
        let short = secure_with_some_sequence(db, dp, n).unwrap();
        let long = secure_with_some_sequence(db, dp, n + 1).unwrap();
        prop_assert!(short.is_none() || long.is_some());
    }

    #[test]
    fn asymptotic_rates_fall_with_distance(d in 0.0f64..180.0, mu in 0.05f64..1.0) {
        let ch = ChannelParams::gys();
        for s in [Scheme::OneWay, Scheme::BSteps(1), Scheme::Recurrence] {
            let cfg = SchemeConfig::new(s);
            prop_assert!(rate_at(&ch, &cfg, d + 5.0, mu).unwrap() <= rate_at(&ch, &cfg, d, mu).unwrap());
        }
    }
}

fn plan(n_total: f64, n_sigma: f64, mu: f64, nu: f64) -> ExperimentPlan {
    ExperimentPlan { n_total, frac_signal: 0.6, frac_vacuum: 0.1, frac_weak: 0.3, mu, nu, n_sigma }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn finite_rate_monotone_in_sigma_and_size(
        d in 0.0f64..130.0,
        mu in 0.2f64..0.9,
        nu_frac in 0.1f64..0.8,
        sigma in 0.0f64..10.0,
        log_n in 8.0f64..11.0,
    ) {
        let ch = ChannelParams::gys();
        let nu = mu * nu_frac;
        let n = 10f64.powf(log_n);
        for s in [Scheme::OneWay, Scheme::BSteps(1)] {
            let cfg = SchemeConfig::new(s);
            let base = finite_rate(&ch, &plan(n, sigma, mu, nu), &cfg, d).unwrap();
            let wider = finite_rate(&ch, &plan(n, sigma + 1.0, mu, nu), &cfg, d).unwrap();
            let bigger = finite_rate(&ch, &plan(2.0 * n, sigma, mu, nu), &cfg, d).unwrap();
            prop_assert!(wider <= base + 1e-18, "{s} sigma: {wider} > {base}");
            prop_assert!(bigger + 1e-18 >= base, "{s} size: {bigger} < {base}");
        }
    }
}
