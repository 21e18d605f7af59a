use ccr_invest::after_default::{log_kp, strategy_after, value_after};
use ccr_invest::before_default::{solve, time_average_strategy, Driver, SolverConfig};
use ccr_invest::model::{AfterDefaultSchedule, DefaultLaw, MarketSpec, Profile, TabulatedDensity, Utility};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn reference(gamma: f64) -> MarketSpec<f64> {
    MarketSpec::new(0.03, 0.1, gamma, 1.0, 1.0)
}

fn exponent() -> impl Strategy<Value = f64> {
    prop_oneof![-3.0..-0.01f64, 0.01..0.9f64]
}

// density values on a uniform grid over [0, 1], scaled to total mass <= 1
fn tabulated() -> impl Strategy<Value = TabulatedDensity<f64>> {
    (prop::collection::vec(0.0..5.0f64, 3..40), 0.05..1.0f64).prop_map(|(raw, mass)| {
        let n = raw.len();
        let theta: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let h = 1.0 / (n - 1) as f64;
        let trap: f64 = raw.windows(2).map(|w| h * (w[0] + w[1]) / 2.0).sum();
        let scale = if trap > 0.0 { mass / trap } else { 0.0 };
        TabulatedDensity::new(theta, raw.iter().map(|a| a * scale).collect()).unwrap()
    })
}

proptest! {
    #[test]
    fn exponential_intensity_is_constant(lambda in 0.0..5.0f64) {
        let law = DefaultLaw::exponential(lambda);
        for i in 0..100 {
            let t = i as f64 / 99.0;
            let h = law.intensity(t).unwrap();
            prop_assert!((h - lambda).abs() <= 4.0 * f64::EPSILON * lambda.max(1.0));
        }
    }

    #[test]
    fn tabulated_survival_balances_cumulative(tab in tabulated()) {
        let law = DefaultLaw::Tabulated(tab.clone());
        let g0 = law.survival(0.0).unwrap();
        prop_assert!((g0 - 1.0).abs() < 1e-12);
        for i in 0..=50 {
            let t = i as f64 / 50.0;
            // Simpson on each grid segment clipped to [0, t]
            let integral: f64 = tab
                .grid()
                .windows(2)
                .filter(|w| w[0] < t)
                .map(|w| {
                    let (a, b) = (w[0], w[1].min(t));
                    let f = |x: f64| law.density(x).unwrap();
                    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
                })
                .sum();
            let g = law.survival(t).unwrap();
            prop_assert!((g + integral - g0).abs() < 1e-8, "t={t}: {g} + {integral}");
            prop_assert!(g >= 0.0);
            prop_assert!(law.density(t).unwrap() >= 0.0);
            if g > 0.0 {
                prop_assert!(law.intensity(t).unwrap() >= 0.0);
            }
        }
    }

    #[test]
    fn exponential_law_is_nonnegative(lambda in 0.0..10.0f64, t in 0.0..50.0f64) {
        let law = DefaultLaw::exponential(lambda);
        prop_assert!(law.density(t).unwrap() >= 0.0);
        prop_assert!(law.survival(t).unwrap() >= 0.0);
        prop_assert!(law.intensity(t).unwrap() >= 0.0);
    }

    #[test]
    fn power_value_is_homogeneous(
        p in exponent(),
        gamma in 0.0..0.9f64,
        lambda in 0.001..1.0f64,
        theta in 0.0..1.0f64,
        x in 0.01..100.0f64,
    ) {
        let m = reference(gamma);
        let law = DefaultLaw::exponential(lambda);
        let u = Utility::Power(p);
        let base = value_after(&m, &law, &u, theta, x).unwrap();
        for c in [0.5, 2.0, 10.0] {
            let scaled = value_after(&m, &law, &u, theta, c * x).unwrap();
            let expected = c.powf(p) * base;
            prop_assert!(((scaled - expected) / expected).abs() < 1e-12);
        }
    }

    #[test]
    fn after_strategy_scaling_invariance(
        p in exponent(),
        mu in -0.1..0.2f64,
        sigma in 0.01..0.5f64,
        c in 0.1..10.0f64,
        theta in 0.0..1.0f64,
    ) {
        let u = Utility::Power(p);
        let a = reference(0.1).with_after(AfterDefaultSchedule::constant(mu, sigma));
        let b = reference(0.1).with_after(AfterDefaultSchedule::constant(c * c * mu, c * sigma));
        let pa = strategy_after(&a, &u, theta).unwrap();
        let pb = strategy_after(&b, &u, theta).unwrap();
        prop_assert!((pa - pb).abs() <= 1e-12 * pa.abs().max(1.0));
    }

    #[test]
    fn log_kp_is_continuous(p in exponent(), lambda in 0.001..1.0f64, n in 10usize..400) {
        let m = reference(0.1);
        let law = DefaultLaw::exponential(lambda);
        let u = Utility::Power(p);
        let values: Vec<f64> = (0..n)
            .map(|i| log_kp(&m, &law, &u, i as f64 / (n - 1) as f64).unwrap())
            .collect();
        let jump = values.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        prop_assert!(jump < 10.0 / n as f64, "max jump {jump}");
    }

    #[test]
    fn driver_maximiser_stays_in_bracket(
        p in prop_oneof![-2.0..-0.05f64, 0.05..0.8f64],
        gamma in 0.01..0.9f64,
        y in 0.2..3.0f64,
        kp in 1e-4..1.0f64,
    ) {
        let d = Driver::new(&reference(gamma), &Utility::Power(p));
        let (lo, hi) = d.bounds(y, kp);
        let best = d.maximize(y, kp, 1e-14).unwrap().pi;
        prop_assert!(best >= lo - 1e-12 && best <= hi + 1e-12, "{best} not in [{lo}, {hi}]");
        prop_assert!(best * gamma < 1.0);
        let slope = d.derivative(best, y, kp);
        prop_assert!(slope.abs() <= 1e-9 * (1.0 + d.derivative(lo, y, kp).abs()));
    }
}

// exp(log_kp) against (E[alpha (Z/alpha)^(-q)])^(p/q), q = p/(1-p), with the
// after-default state price density Z sampled as an explicit lognormal
#[test]
fn log_kp_matches_state_price_expectation() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let cases = [(0.2, 0.05, 0.3), (-0.2, 0.3, 0.1), (0.5, 1.0, 0.7), (-1.0, 0.01, 0.05), (0.1, 0.5, 0.9)];
    for (p, lambda, theta) in cases {
        let (mu_f, sigma_f, horizon) = (0.03, 0.1, 1.0);
        let m = MarketSpec::new(mu_f, sigma_f, 0.1, horizon, 1.0);
        let law = DefaultLaw::exponential(lambda);
        let alpha = lambda * f64::exp(-lambda * theta);
        let b = mu_f * theta / horizon / (sigma_f * (2.0 - theta / horizon));
        let var = b * b * (horizon - theta);
        let q = p / (1.0 - p);
        let n = 1_000_000;
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            let log_z = -0.5 * var + var.sqrt() * z;
            let v = alpha * ((log_z - alpha.ln()) * -q).exp();
            sum += v;
            sum2 += v * v;
        }
        let mean = sum / n as f64;
        let se = ((sum2 / n as f64 - mean * mean).max(0.0) / n as f64).sqrt();
        let power = p / q;
        let estimate = mean.powf(power);
        // delta method
        let se_estimate = (power * mean.powf(power - 1.0)).abs() * se;
        let exact = log_kp(&m, &law, &Utility::Power(p), theta).unwrap().exp();
        assert!(
            (estimate - exact).abs() <= 3.0 * se_estimate + 1e-12 * exact,
            "p={p} lambda={lambda} theta={theta}: {estimate} vs {exact} (se {se_estimate})"
        );
    }
}

#[test]
fn solution_is_dominated_by_merton() {
    let cfg = SolverConfig::default().with_steps(200);
    for p in [0.2, -0.2, 0.5] {
        for gamma in [0.01, 0.1, 0.5, 0.8] {
            let sol = solve(&reference(gamma), &DefaultLaw::exponential(0.05), &Utility::Power(p), &cfg).unwrap();
            for i in 0..sol.len() {
                assert!(sol.pi[i] <= sol.pi_merton[i] + 1e-12);
                assert!(sol.pi[i] >= sol.pi_lower[i] - cfg.root_tol && sol.pi[i] <= sol.pi_upper[i] + cfg.root_tol);
            }
            assert_eq!(*sol.y.last().unwrap(), (-0.05f64).exp());
        }
    }
}

#[test]
fn averaged_strategy_decreases_in_loss_and_intensity() {
    let cfg = SolverConfig::default().with_steps(200);
    for u in [Utility::Power(0.2), Utility::Log, Utility::Power(-0.2)] {
        let by_gamma: Vec<f64> = [0.01, 0.1, 0.5, 0.8]
            .iter()
            .map(|&g| time_average_strategy(&solve(&reference(g), &DefaultLaw::exponential(0.01), &u, &cfg).unwrap()))
            .collect();
        assert!(by_gamma.windows(2).all(|w| w[1] <= w[0]), "{u:?}: {by_gamma:?}");
        for gamma in [0.1, 0.5] {
            let by_lambda: Vec<f64> = [0.01, 0.05, 0.1, 0.3]
                .iter()
                .map(|&l| time_average_strategy(&solve(&reference(gamma), &DefaultLaw::exponential(l), &u, &cfg).unwrap()))
                .collect();
            assert!(by_lambda.windows(2).all(|w| w[1] <= w[0]), "{u:?} gamma={gamma}: {by_lambda:?}");
        }
    }
}

#[test]
fn multiplier_decreases_in_time_for_positive_exponent() {
    let cfg = SolverConfig::default().with_steps(300);
    for gamma in [0.01, 0.5, 0.8] {
        for lambda in [0.01, 0.3, 2.0] {
            let sol = solve(&reference(gamma), &DefaultLaw::exponential(lambda), &Utility::Power(0.3), &cfg).unwrap();
            assert!(sol.y.windows(2).all(|w| w[1] < w[0]));
        }
    }
}

#[test]
fn converging_schedule_profiles() {
    let s = AfterDefaultSchedule::converging(0.03f64, 0.1);
    let (mu, sigma) = s.coefficients(0.25, 0.5, 1.0);
    assert!((mu - 0.0075).abs() < 1e-15 && (sigma - 0.175).abs() < 1e-15);
    assert_eq!(Profile::Constant { value: 2.0f64 }.at(0.3, 1.0), 2.0);
}
