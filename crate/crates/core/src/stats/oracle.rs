//! Two independent estimators of the probability that the tagged particle
//! and the `m`-th particle to its right share a cluster by time `t` at
//! `alpha = 0`.
//!
//! Until they connect, the two particles ride on distinct clusters that each
//! step at rate 1, so their separation minus `m` is a rate-2 simple random
//! walk started from a sum of `m` shifted geometric gaps. The particles are
//! connected exactly when that walk has reached zero.

use rand::Rng;
use rand_distr::{Distribution, Geometric, Poisson};
use rayon::prelude::*;

use super::StatsError;
use crate::ensemble::derive_replica_seed;
use crate::lattice1d::{Config1D, TagRule, World1D};
use crate::rng_from_seed;

/// A Monte Carlo proportion with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_counts(successes: usize, n: usize) -> Self {
        let mean = successes as f64 / n as f64;
        Estimate {
            mean,
            stderr: (mean * (1.0 - mean) / n as f64).sqrt(),
            n,
        }
    }

    /// `|a - b| / sqrt(se_a^2 + se_b^2)`; zero when both are exact and equal.
    pub fn z_score(&self, other: &Estimate) -> f64 {
        let diff = (self.mean - other.mean).abs();
        let se = self.stderr.hypot(other.stderr);
        if se == 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            diff / se
        }
    }
}

/// Estimates the connection probability without the cluster engine.
pub fn difference_walk_oracle<R: Rng + ?Sized>(
    m: usize,
    p: f64,
    t: f64,
    replicas: usize,
    rng: &mut R,
) -> Result<Estimate, StatsError> {
    if m == 0 || !(p > 0.0 && p < 1.0) || !(t >= 0.0) || !t.is_finite() || replicas == 0 {
        return Err(StatsError::InvalidParams(format!(
            "m={m}, p={p}, t={t}, replicas={replicas}"
        )));
    }
    let gap = Geometric::new(p).map_err(|e| StatsError::InvalidParams(e.to_string()))?;
    let jumps = if t > 0.0 {
        Some(Poisson::new(2.0 * t).map_err(|e| StatsError::InvalidParams(e.to_string()))?)
    } else {
        None
    };
    let mut hits = 0;
    for _ in 0..replicas {
        // Geometric counts failures, i.e. G - 1 for G on {1, 2, ...}.
        let mut d: i64 = (0..m).map(|_| gap.sample(rng) as i64).sum();
        if d <= 0 {
            hits += 1;
            continue;
        }
        let n = match &jumps {
            Some(pois) => pois.sample(rng) as i64,
            None => 0,
        };
        if walk_hits_zero(&mut d, n, rng) {
            hits += 1;
        }
    }
    Ok(Estimate::from_counts(hits, replicas))
}

/// Runs `n` fair +-1 steps from `*d > 0`; true if zero is reached.
fn walk_hits_zero<R: Rng + ?Sized>(d: &mut i64, mut n: i64, rng: &mut R) -> bool {
    while n > 0 {
        if *d > n {
            return false;
        }
        let bits: u64 = rng.random();
        let take = n.min(64);
        for b in 0..take {
            *d += if bits >> b & 1 == 1 { 1 } else { -1 };
            if *d == 0 {
                return true;
            }
        }
        n -= take;
    }
    false
}

/// The same probabilities estimated with the full engine, one estimate per
/// entry of `ms`. Replica `i` uses `derive_replica_seed(master_seed, i)`.
pub fn engine_connection_probability(
    ms: &[usize],
    p: f64,
    t: f64,
    length: usize,
    replicas: usize,
    master_seed: u64,
) -> Result<Vec<Estimate>, StatsError> {
    if replicas == 0 || ms.is_empty() {
        return Err(StatsError::InvalidParams("need replicas and offsets".into()));
    }
    let mut config = Config1D::new(0.0, p, length, t);
    config.obs_times.clear();
    config.guard_fraction = 1.0;
    config.tag_rule = TagRule::FirstAtOrRight;
    config.validate()?;

    let outcomes: Vec<Result<Vec<bool>, StatsError>> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(derive_replica_seed(master_seed, i as u64));
            let mut world = World1D::init(&config, &mut rng)?;
            world.advance_to(t, &mut rng)?;
            Ok(ms
                .iter()
                .map(|&m| m < world.total_particles() && world.tagged_connected_right(m))
                .collect())
        })
        .collect();
    let mut hits = vec![0usize; ms.len()];
    for outcome in outcomes {
        for (h, connected) in hits.iter_mut().zip(outcome?) {
            *h += connected as usize;
        }
    }
    Ok(hits
        .into_iter()
        .map(|h| Estimate::from_counts(h, replicas))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_time_is_all_gaps_unit() {
        let mut rng = rng_from_seed(3);
        let est = difference_walk_oracle(1, 0.4, 0.0, 200_000, &mut rng).unwrap();
        assert!((est.mean - 0.4).abs() < 4.0 * est.stderr);
        let est = difference_walk_oracle(3, 0.5, 0.0, 200_000, &mut rng).unwrap();
        assert!((est.mean - 0.125).abs() < 4.0 * est.stderr);
    }

    #[test]
    fn recurrence_at_long_times() {
        let mut rng = rng_from_seed(4);
        let mut last = 0.0;
        for t in [1e2, 1e4, 1e6] {
            let est = difference_walk_oracle(1, 0.5, t, 2000, &mut rng).unwrap();
            assert!(est.mean >= last - 4.0 * est.stderr);
            last = est.mean;
        }
        assert!(last >= 0.99, "{last}");
    }

    #[test]
    fn rejects_bad_params() {
        let mut rng = rng_from_seed(0);
        assert!(difference_walk_oracle(0, 0.5, 1.0, 10, &mut rng).is_err());
        assert!(difference_walk_oracle(1, 1.0, 1.0, 10, &mut rng).is_err());
        assert!(difference_walk_oracle(1, 0.5, -1.0, 10, &mut rng).is_err());
        assert!(difference_walk_oracle(1, 0.5, 1.0, 0, &mut rng).is_err());
    }

    #[test]
    fn walk_step_accounting() {
        // From distance 3 a walk of 2 steps can never reach zero.
        let mut rng = rng_from_seed(0);
        let mut d = 3;
        assert!(!walk_hits_zero(&mut d, 2, &mut rng));
        let hits = (0..10_000)
            .filter(|_| walk_hits_zero(&mut 1, 1, &mut rng))
            .count();
        assert!((hits as f64 / 10_000.0 - 0.5).abs() < 0.03);
    }

    #[test]
    fn z_score_handles_exact_estimates() {
        let a = Estimate::from_counts(10, 10);
        assert_eq!(a.z_score(&a), 0.0);
        let b = Estimate::from_counts(0, 10);
        assert_eq!(a.z_score(&b), f64::INFINITY);
    }
}
