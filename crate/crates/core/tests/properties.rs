use freeze_lab_core::math::log_sum_exp;
use freeze_lab_core::measures::{eigen_data, mu_blocks, nu_blocks};
use freeze_lab_core::oracle::{error_bound, oracle_report, ORACLE_TOL};
use freeze_lab_core::pressure::{residual, solve_pressure, DEFAULT_TOL};
use freeze_lab_core::series::{f_prefixed, f_series, f_truncated, g_series, s_factor};
use freeze_lab_core::tropical::{
    build_m, build_m_closed_form, critical_cycles, gamma_closed_form, max_cycle_mean, subaction_eigenvector, Cycle,
};
use freeze_lab_core::ModelParams;
use proptest::prelude::*;

fn params_strategy() -> impl Strategy<Value = ModelParams> {
    (
        0.05f64..0.95,
        0.1f64..5.0,
        0.01f64..3.0,
        0.01f64..3.0,
        0.01f64..3.0,
        0.01f64..10.0,
        prop::option::of((0.0f64..2.0, 0.0f64..2.0)),
    )
        .prop_map(|(theta, a1, g1, d, g2, au, third)| {
            let a2 = a1 + d;
            let mut b1 = vec![a1, a1 + g1];
            let mut b2 = vec![a2, a2 + g2];
            if let Some((x, y)) = third {
                b1.push(b1[1] + x);
                b2.push(b2[1] + y);
            }
            ModelParams::new(theta, vec![b1, b2], au).unwrap()
        })
}

fn slopes_strategy() -> impl Strategy<Value = (Vec<f64>, f64)> {
    (prop::collection::vec(0.0f64..20.0, 2..5), 0.05f64..0.95).prop_map(|(mut z, theta)| {
        z.sort_by(f64::total_cmp);
        (z, theta)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn gamma_is_the_negated_max_cycle_mean(m in params_strategy()) {
        let product = build_m(&m);
        let gamma = gamma_closed_form(&m);
        prop_assert!((-max_cycle_mean(&product).unwrap() - gamma).abs() < 1e-12);
        prop_assert!(product.max_abs_diff(&build_m_closed_form(&m)) < 1e-12);
        for c in critical_cycles(&product, gamma, 1e-12).unwrap() {
            prop_assert!(c == Cycle(vec![0]) || c == Cycle(vec![0, 1]), "unexpected cycle {}", c);
        }
    }

    #[test]
    fn subaction_solves_the_max_plus_equation(m in params_strategy()) {
        prop_assert!(subaction_eigenvector(&m).residual(&m) < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn f_shift_recursion((z, theta) in slopes_strategy(), excess in 0.02f64..3.0) {
        let big_z = (z.len() as f64).ln() + excess;
        let f = f_series(big_z, &z, theta, 1e-15).unwrap().value();
        let zt: Vec<f64> = z.iter().map(|x| x * theta).collect();
        let ft = f_series(big_z, &zt, theta, 1e-15).unwrap().value();
        let rhs = (-big_z + s_factor(&z, theta, 1)).exp() * (1.0 + ft);
        prop_assert!((f - rhs).abs() / f < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn series_decrease_in_z_cap_and_slopes((z, theta) in slopes_strategy(), excess in 0.05f64..2.0, i in 0usize..4) {
        let big_z = (z.len() as f64).ln() + excess;
        let h = 1e-3;
        let f = f_series(big_z, &z, theta, 1e-15).unwrap().value();
        let g = g_series(big_z, &z, theta, 1e-15).unwrap().value();
        let fp = f_prefixed(big_z, &z, theta, -0.5, 1e-15).unwrap().value();
        prop_assert!(g >= f);
        prop_assert!(f_series(big_z + h, &z, theta, 1e-15).unwrap().value() < f);
        prop_assert!(g_series(big_z + h, &z, theta, 1e-15).unwrap().value() < g);
        prop_assert!(f_prefixed(big_z + h, &z, theta, -0.5, 1e-15).unwrap().value() < fp);
        let mut zi = z.clone();
        let k = i % zi.len();
        zi[k] += 0.1;
        prop_assert!(f_series(big_z, &zi, theta, 1e-15).unwrap().value() < f);
        prop_assert!(g_series(big_z, &zi, theta, 1e-15).unwrap().value() < g);
        prop_assert!(f_prefixed(big_z, &zi, theta, -0.5, 1e-15).unwrap().value() < fp);
    }

    #[test]
    fn truncation_bound_is_certified((z, theta) in slopes_strategy(), excess in 0.05f64..2.0, k in 1usize..200) {
        let big_z = (z.len() as f64).ln() + excess;
        let full = f_series(big_z, &z, theta, 1e-16).unwrap();
        let part = f_truncated(big_z, &z, theta, k).unwrap();
        let rel = 1.0 - (part.log_value - full.log_value).exp();
        prop_assert!(rel <= part.tail_rel_bound * (1.0 + 1e-9) + 1e-14);
        prop_assert!(full.tail_rel_bound <= 1e-16);
    }

    #[test]
    fn solved_pressure_is_consistent(m in params_strategy(), beta in 0.0f64..60.0) {
        let s = solve_pressure(&m, beta, DEFAULT_TOL).unwrap();
        let ln_p = (m.p() as f64).ln();
        prop_assert!(s.pressure >= ln_p - 1e-15 && s.ln_gap.is_finite());
        prop_assert!(s.pressure <= ((m.n_blocks() * m.p() + 1) as f64).ln() + 1e-12);
        prop_assert!(s.residual.abs() < 1e-12);
        // Re-evaluating at the rounded P is only well conditioned while the gap is resolved.
        if s.gap().value() > 1e-6 {
            prop_assert!(residual(&m, beta, s.pressure).unwrap().abs() < 1e-9);
        }
        let nu = nu_blocks(&m, &s);
        prop_assert!((nu.o.iter().sum::<f64>() + nu.u - 1.0).abs() < 1e-10);
        let mu = mu_blocks(&m, &s).unwrap();
        prop_assert!((mu.o.iter().sum::<f64>() + mu.u - 1.0).abs() < 1e-10);
        prop_assert!(mu.o.iter().chain(nu.o.iter()).all(|&x| (0.0..=1.0).contains(&x)));
        let eig = eigen_data(&m, &s);
        let c: Vec<f64> = eig.log_tau.iter().zip(&eig.log_f).map(|(t, f)| t + log_sum_exp(&[0.0, *f])).collect();
        prop_assert!(c.iter().all(|x| (x - c[0]).abs() < 1e-10));
    }

    #[test]
    fn pressure_decreases_in_beta(m in params_strategy(), beta in 0.0f64..40.0, step in 0.1f64..5.0) {
        let a = solve_pressure(&m, beta, DEFAULT_TOL).unwrap();
        let b = solve_pressure(&m, beta + step, DEFAULT_TOL).unwrap();
        prop_assert!(b.pressure <= a.pressure);
        prop_assert!(b.ln_gap < a.ln_gap);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn oracle_brackets_pressure(m in params_strategy(), beta in 0.0f64..6.0) {
        let s = solve_pressure(&m, beta, DEFAULT_TOL).unwrap();
        let depth = 80;
        let r = oracle_report(&m, beta, depth, ORACLE_TOL).unwrap();
        prop_assert!((r.ln_lambda - s.pressure).abs() <= error_bound(&m, beta, depth) + 1e-9);
    }
}
