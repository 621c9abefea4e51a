use cca_core::lattice1d::{run, Config1D};
use cca_core::rng_from_seed;
use cca_core::stats::{
    difference_walk_oracle, exp1_ks, fit_power_law, ks_critical_value, ks_distance,
    time_change_intervals, Ecdf,
};
use cca_core::theory::{limit_cdf, limit_quantile, LimitLawParams};
use rand::Rng;
use rand_distr::{Distribution, Normal};

#[test]
fn limit_law_draws_pass_their_own_ks_test() {
    let params = LimitLawParams::new(0.5).unwrap();
    let mut rng = rng_from_seed(31);
    let n = 10_000;
    let critical = 1.63 / (n as f64).sqrt();
    let passes = (0..100)
        .filter(|_| {
            let draws: Vec<f64> = (0..n)
                .map(|_| limit_quantile(rng.random::<f64>(), &params))
                .collect();
            let ecdf = Ecdf::new(draws).unwrap();
            ks_distance(&ecdf, |x| limit_cdf(x, &params)) < critical
        })
        .count();
    assert!(passes >= 95, "{passes}/100");
}

#[test]
fn noisy_square_root_fixture() {
    let mut rng = rng_from_seed(17);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let points: Vec<(f64, f64)> = (0..12)
        .map(|k| {
            let t = 10f64 * 2f64.powi(k);
            (t, t.sqrt() * (1.0 + noise.sample(&mut rng)))
        })
        .collect();
    let fit = fit_power_law(&points).unwrap();
    assert!((fit.slope - 0.5).abs() <= 0.02, "{}", fit.slope);
}

#[test]
fn time_changed_steps_look_exponential() {
    let mut config = Config1D::new(-1.0, 0.5, 16384, 128.0);
    config.log_tagged_steps = true;
    config.seed = 8;
    let report = run(&config, &mut rng_from_seed(config.seed)).unwrap();
    let log = report.log.unwrap();
    let intervals = time_change_intervals(&log, config.alpha).unwrap();
    assert!(intervals.len() >= 500, "{}", intervals.len());
    let d = exp1_ks(&intervals[..500]).unwrap();
    assert!(d < 0.0727, "{d}");
    assert!(ks_critical_value(500, 0.01) > 0.0727);
}

#[test]
fn neighbours_eventually_connect() {
    let mut rng = rng_from_seed(21);
    let est = difference_walk_oracle(1, 0.5, 1e6, 2000, &mut rng).unwrap();
    assert!(est.mean >= 0.99, "{}", est.mean);
}
