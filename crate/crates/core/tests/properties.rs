use proptest::prelude::*;

use ringload::critical::{lambda_lower, lambda_upper, phase_sweep};
use ringload::rates::{
    balanced_set_rate, configuration_rate, optimal_profile, rate_j, scenario, solve_theta_l, solve_theta_star,
    Configuration,
};
use ringload::{MessageLengthModel, NetworkParams};

fn models() -> Vec<MessageLengthModel> {
    vec![
        MessageLengthModel::exponential(1.0).unwrap(),
        MessageLengthModel::mixture(1.0, 0.5).unwrap(),
        MessageLengthModel::deterministic(1.0).unwrap(),
    ]
}

fn model_strategy() -> impl Strategy<Value = MessageLengthModel> {
    prop_oneof![
        (0.3f64..3.0).prop_map(|c| MessageLengthModel::exponential(c).unwrap()),
        (0.3f64..3.0, 0.0f64..0.9).prop_map(|(c, r)| MessageLengthModel::mixture(c, r * c).unwrap()),
        (0.3f64..3.0).prop_map(|c| MessageLengthModel::deterministic(c).unwrap()),
    ]
}

#[test]
fn theta_decreases_in_lambda() {
    for m in models() {
        let hat = m.hat_lambda();
        for l in 1..5 {
            let mut prev = f64::INFINITY;
            for i in 1..40 {
                let lambda = hat * i as f64 / 40.0;
                let th = solve_theta_l(&m, lambda, l).unwrap();
                assert!(th < prev, "{m} l={l} λ={lambda}");
                prev = th;
            }
        }
    }
}

#[test]
fn exponential_roots_have_closed_forms() {
    let m = MessageLengthModel::exponential(1.0).unwrap();
    for i in 1..20 {
        let lambda = i as f64 / 20.0;
        assert!((solve_theta_star(&m, lambda).unwrap() - (1.0 - lambda)).abs() < 1e-12);
        for l in 1..6 {
            let want = 1.0 - l as f64 * lambda / (l as f64 + 1.0);
            assert!((solve_theta_l(&m, lambda, l).unwrap() - want).abs() < 1e-12);
        }
    }
}

#[test]
fn scenario_optimum_equals_balanced_configuration_rate() {
    // The scenario cost equals the cost of driving its flows at the optimal
    // input slope for the optimal duration.
    for m in models() {
        for &lambda in &[0.2 * m.hat_lambda(), 0.6 * m.hat_lambda(), 0.95 * m.hat_lambda()] {
            let p = NetworkParams::new(5, lambda, 1.3, m).unwrap();
            for l in 1..=5 {
                let Ok(prof) = optimal_profile(&p, l) else { continue };
                let direct = balanced_set_rate(&m, lambda, prof.input_slope, l, prof.duration).unwrap();
                assert!((direct - prof.rate).abs() < 1e-7 * prof.rate.max(1.0), "{m} λ={lambda} l={l}");
                let mut slopes = vec![lambda * m.mean(); 5];
                slopes[..l].fill(prof.input_slope);
                let cfg = Configuration::new(slopes, prof.duration).unwrap();
                let via_cfg = configuration_rate(&m, lambda, &cfg).unwrap();
                assert!((via_cfg - prof.rate).abs() < 1e-7 * prof.rate.max(1.0));
            }
        }
    }
}

#[test]
fn collective_beats_k_minus_one() {
    for m in models() {
        for k in [3usize, 6, 11] {
            for i in 1..30 {
                let lambda = m.hat_lambda() * i as f64 / 30.0;
                let p = NetworkParams::new(k, lambda, 1.0, m).unwrap();
                assert!(rate_j(&p, k).unwrap() < rate_j(&p, k - 1).unwrap());
            }
        }
    }
}

#[test]
fn critical_rates_bracket_the_phase_diagram() {
    for m in models() {
        for k in [3usize, 5, 8] {
            let lo = lambda_lower(&m, k).unwrap();
            let hi = lambda_upper(&m, k).unwrap();
            assert!(lo <= hi + 1e-12 && hi < m.hat_lambda());
            let grid: Vec<f64> = (1..60).map(|i| m.hat_lambda() * i as f64 / 60.0).collect();
            let diag = phase_sweep(&m, k, 1.0, &grid).unwrap();
            for row in &diag.rows {
                if row.lambda < lo - 1e-9 {
                    assert_eq!(row.l_opt, 1, "{m} k={k} λ={}", row.lambda);
                }
                if row.lambda > hi + 1e-9 {
                    assert_eq!(row.l_opt, k, "{m} k={k} λ={}", row.lambda);
                }
            }
        }
    }
}

proptest! {
    #[test]
    fn roots_solve_their_equations(m in model_strategy(), frac in 0.02f64..0.98, l in 1usize..8) {
        let lambda = frac * m.hat_lambda();
        let th = solve_theta_l(&m, lambda, l).unwrap();
        let lhs = (l as f64 + 1.0) * th;
        let rhs = l as f64 * lambda * m.mgf_minus_one(th).unwrap();
        prop_assert!(th > 0.0);
        prop_assert!((lhs - rhs).abs() < 1e-9 * lhs.max(1.0));
        let ts = solve_theta_star(&m, lambda).unwrap();
        prop_assert!((ts - lambda * m.mgf_minus_one(ts).unwrap()).abs() < 1e-9 * ts.max(1.0));
        prop_assert!(ts < th);
    }

    #[test]
    fn l_opt_ignores_delay_level(m in model_strategy(), frac in 0.05f64..0.95, k in 3usize..9, d in 0.1f64..20.0) {
        let lambda = frac * m.hat_lambda();
        let a = scenario(&NetworkParams::new(k, lambda, 1.0, m).unwrap()).unwrap();
        let b = scenario(&NetworkParams::new(k, lambda, d, m).unwrap()).unwrap();
        prop_assert_eq!(a.l_opt, b.l_opt);
        prop_assert!((b.min_rate() - d * a.min_rate()).abs() < 1e-9 * b.min_rate().max(1.0));
    }

    #[test]
    fn profile_reaches_the_delay_level(m in model_strategy(), frac in 0.05f64..0.95, l in 1usize..6, d in 0.1f64..5.0) {
        let p = NetworkParams::new(6, frac * m.hat_lambda(), d, m).unwrap();
        if let Ok(prof) = optimal_profile(&p, l) {
            prop_assert!(((prof.load_slope - 1.0) * prof.duration - d).abs() < 1e-9 * d.max(1.0));
        }
    }

    #[test]
    fn legendre_is_monotone_above_the_mean(m in model_strategy(), frac in 0.05f64..0.95, x in 1.0f64..3.0, y in 1.0f64..3.0) {
        let lambda = frac * m.hat_lambda();
        let mean = lambda * m.mean();
        let (lo, hi) = if x < y { (x, y) } else { (y, x) };
        let a = m.legendre(lambda, lo * mean).unwrap().value;
        let b = m.legendre(lambda, hi * mean).unwrap().value;
        prop_assert!(a >= 0.0 && a <= b + 1e-9);
    }
}
