mod common;

use cca_core::ensemble::derive_replica_seed;
use cca_core::lattice1d::{cluster_rate, Config1D, World1D};
use cca_core::rng_from_seed;
use cca_core::stats::{fit_power_law, kolmogorov_cdf, ks_distance, ks_exact_cdf, Ecdf};
use cca_core::theory::{gamma_sequence, limit_cdf, limit_quantile, LimitLawParams};
use common::strategy::small_case;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn engine_keeps_gaps_and_particles(case in small_case()) {
        common::check_engine_invariants(&case).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn replays_are_identical(case in small_case()) {
        common::check_determinism(&case).map_err(TestCaseError::fail)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ensembles_ignore_thread_count(case in small_case()) {
        common::check_parallelism_invariance(&case).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn engine_d_stays_consistent(
        d in 2usize..=3,
        length in 2usize..=9,
        p in 0.05f64..0.9,
        alpha in -1.0f64..2.0,
        seed in any::<u64>(),
    ) {
        common::check_engine_d_invariants(d, length, p, alpha, seed, 300)
            .map_err(TestCaseError::fail)?;
    }

    #[test]
    fn initial_clusters_partition_occupancy(
        length in 2usize..=256,
        p in 0.01f64..=1.0,
        seed in any::<u64>(),
    ) {
        let config = Config1D::new(0.0, p, length, 1.0);
        let mut rng = rng_from_seed(seed);
        let occ: Vec<bool> = {
            use rand::Rng;
            let mut r = rng.clone();
            (0..length).map(|_| p >= 1.0 || r.random_bool(p)).collect()
        };
        match World1D::init(&config, &mut rng) {
            Ok(w) => {
                prop_assert_eq!(w.occupancy(), occ.clone());
                // Runs of occupied sites, counted with wraparound.
                let runs = (0..length).filter(|&i| occ[i] && !occ[(i + length - 1) % length]).count();
                let expected = if occ.iter().all(|&o| o) { 1 } else { runs };
                prop_assert_eq!(w.n_clusters(), expected);
            }
            Err(_) => prop_assert!(occ.iter().all(|&o| !o)),
        }
    }

    #[test]
    fn rates_follow_size(size in 1usize..100_000, alpha in -3.0f64..3.0, cap in 0.5f64..1e4) {
        let r = cluster_rate(size, alpha, None);
        prop_assert!((r - (size as f64).powf(-alpha)).abs() <= 1e-12 * r);
        prop_assert!(cluster_rate(size, alpha, Some(cap)) <= cap);
    }

    #[test]
    fn limit_cdf_is_monotone(p in 0.01f64..0.99, x in 0.0f64..50.0, dx in 0.0f64..5.0) {
        let params = LimitLawParams::new(p).unwrap();
        let a = limit_cdf(x, &params);
        let b = limit_cdf(x + dx, &params);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b >= a);
    }

    #[test]
    fn quantile_round_trips(p in 0.05f64..0.95, u in 1e-6f64..(1.0 - 1e-6)) {
        let params = LimitLawParams::new(p).unwrap();
        let x = limit_quantile(u, &params);
        prop_assert!((limit_cdf(x, &params) - u).abs() < 1e-10);
    }

    #[test]
    fn gamma_tracks_its_fixed_point(alpha in -1.9f64..1.9) {
        let g = gamma_sequence(alpha, 400);
        let fixed = 1.0 / (alpha + 2.0);
        // |alpha/2| < 1 makes the affine map a contraction.
        prop_assert!((g[399] - fixed).abs() < 1e-6);
    }

    #[test]
    fn ks_distance_is_bounded(xs in prop::collection::vec(0.0f64..1.0, 1..200)) {
        let n = xs.len() as f64;
        let e = Ecdf::new(xs).unwrap();
        let d = ks_distance(&e, |x| x.clamp(0.0, 1.0));
        prop_assert!(d >= 0.5 / n - 1e-12 && d <= 1.0);
    }

    #[test]
    fn ks_null_law_is_a_cdf(n in 1usize..60, d1 in 0.0f64..1.0, d2 in 0.0f64..1.0) {
        let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        let a = ks_exact_cdf(n, lo);
        let b = ks_exact_cdf(n, hi);
        prop_assert!((-1e-9..=1.0 + 1e-9).contains(&a));
        prop_assert!(b + 1e-9 >= a);
        prop_assert!(kolmogorov_cdf(hi) + 1e-12 >= kolmogorov_cdf(lo));
    }

    #[test]
    fn power_law_recovers_exact_slopes(
        slope in -2.0f64..2.0,
        scale in 0.1f64..10.0,
        ts in prop::collection::btree_set(1u32..100_000, 3..10),
    ) {
        let pts: Vec<(f64, f64)> = ts.iter().map(|&t| (t as f64, scale * (t as f64).powf(slope))).collect();
        let fit = fit_power_law(&pts).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-9);
    }
}

#[test]
fn replica_seeds_never_collide() {
    let mut seeds: Vec<u64> = (0..1_000_000u64).map(|i| derive_replica_seed(0xC0FFEE, i)).collect();
    seeds.sort_unstable();
    seeds.dedup();
    assert_eq!(seeds.len(), 1_000_000);
}
