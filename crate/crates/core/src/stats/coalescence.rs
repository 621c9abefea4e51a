//! Full-coalescence times on finite tori.
//!
//! For `alpha < -2` the infinite system produces an infinite cluster in
//! finite time; on a torus this shows up as a coalescence time that stays
//! bounded as the circumference grows, whereas diffusive regimes scale like
//! `L^2`.

use rayon::prelude::*;

use super::StatsError;
use crate::ensemble::derive_replica_seed;
use crate::lattice1d::{run_until_coalesced, Config1D};
use crate::rng_from_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupConfig {
    pub alpha: f64,
    pub p: f64,
    pub sizes: Vec<usize>,
    pub replicas: usize,
    pub master_seed: u64,
    /// Replicas still fragmented at this time count as `+inf`.
    pub t_limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoalescencePoint {
    pub length: usize,
    pub median: f64,
    pub times: Vec<f64>,
    /// Replicas stopped because the clock no longer advanced.
    pub stalled: usize,
    /// Replicas that hit `t_limit` before coalescing.
    pub unfinished: usize,
}

/// Median of a sample (mean of the two central order statistics for even
/// sizes).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Median full-coalescence time per torus size.
pub fn coalescence_scaling(config: &BlowupConfig) -> Result<Vec<CoalescencePoint>, StatsError> {
    if config.replicas == 0 || config.sizes.iter().any(|&l| l < 4) {
        return Err(StatsError::InvalidParams(
            "need at least one replica and every L >= 4".into(),
        ));
    }
    config
        .sizes
        .iter()
        .map(|&length| {
            let mut base = Config1D::new(config.alpha, config.p, length, 0.0);
            base.obs_times.clear();
            base.guard_fraction = 1.0;
            base.validate()?;
            let size_seed = derive_replica_seed(config.master_seed, length as u64);
            let runs: Vec<_> = (0..config.replicas)
                .into_par_iter()
                .map(|i| {
                    let mut rng = rng_from_seed(derive_replica_seed(size_seed, i as u64));
                    run_until_coalesced(&base, config.t_limit, &mut rng)
                })
                .collect::<Result<_, _>>()?;
            let times: Vec<f64> = runs
                .iter()
                .map(|c| if c.coalesced { c.time } else { f64::INFINITY })
                .collect();
            Ok(CoalescencePoint {
                length,
                median: median(&times).unwrap_or(f64::NAN),
                stalled: runs.iter().filter(|c| c.stalled).count(),
                unfinished: runs.iter().filter(|c| !c.coalesced).count(),
                times,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn saturated_torus_coalesces_at_zero() {
        let cfg = BlowupConfig {
            alpha: 0.0,
            p: 1.0,
            sizes: vec![4],
            replicas: 3,
            master_seed: 1,
            t_limit: f64::INFINITY,
        };
        let out = coalescence_scaling(&cfg).unwrap();
        assert_eq!(out[0].median, 0.0);
    }

    #[test]
    fn rejects_tiny_tori() {
        let cfg = BlowupConfig {
            alpha: 0.0,
            p: 0.5,
            sizes: vec![3],
            replicas: 1,
            master_seed: 1,
            t_limit: 1.0,
        };
        assert!(coalescence_scaling(&cfg).is_err());
    }

    #[test]
    fn time_limit_marks_unfinished() {
        let cfg = BlowupConfig {
            alpha: 1.0,
            p: 0.3,
            sizes: vec![256],
            replicas: 4,
            master_seed: 9,
            t_limit: 1.0,
        };
        let out = coalescence_scaling(&cfg).unwrap();
        assert_eq!(out[0].unfinished, 4);
        assert!(out[0].median.is_infinite());
    }
}
