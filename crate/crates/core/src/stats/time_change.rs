//! Random time change of the tagged cluster's step times.
//!
//! Between two of its own steps the tagged cluster rings at the piecewise
//! constant rate `size^-alpha`; integrating that rate over each inter-step
//! interval yields i.i.d. Exp(1) variables.

use super::StatsError;
use crate::lattice1d::{StepKind, TaggedClusterLog};

/// Integrated rate over each interval ending at a step of the tagged
/// cluster. Passive merges split the integral; the censored tail after the
/// last step is dropped.
pub fn time_change_intervals(
    log: &TaggedClusterLog,
    alpha: f64,
) -> Result<Vec<f64>, StatsError> {
    let mut out = Vec::new();
    let mut cursor = 0.0;
    let mut size = log.initial_size;
    let mut acc = 0.0;
    for (i, e) in log.entries.iter().enumerate() {
        if e.t < cursor || (i > 0 && e.t <= cursor) || e.size_after < e.size_before {
            return Err(StatsError::NonMonotoneLog(i));
        }
        acc += (size as f64).powf(-alpha) * (e.t - cursor);
        cursor = e.t;
        if e.kind == StepKind::Move {
            out.push(acc);
            acc = 0.0;
        }
        size = e.size_after;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice1d::TaggedStep;

    fn step(t: f64, before: usize, after: usize, kind: StepKind) -> TaggedStep {
        TaggedStep {
            t,
            size_before: before,
            size_after: after,
            kind,
        }
    }

    #[test]
    fn constant_size() {
        let log = TaggedClusterLog {
            initial_size: 4,
            entries: vec![step(0.75, 4, 4, StepKind::Move)],
        };
        let out = time_change_intervals(&log, 0.5).unwrap();
        assert_eq!(out, vec![0.5 * 0.75]);
    }

    #[test]
    fn passive_merge_splits_integral() {
        let log = TaggedClusterLog {
            initial_size: 1,
            entries: vec![
                step(1.0, 1, 2, StepKind::Merge),
                step(2.0, 2, 2, StepKind::Move),
            ],
        };
        assert_eq!(time_change_intervals(&log, 1.0).unwrap(), vec![1.5]);
    }

    #[test]
    fn total_matches_piecewise_integral() {
        // sizes: 2 on [0,1), 5 on [1,3), 9 on [3,3.5), 9 on [3.5, 4.25)
        let log = TaggedClusterLog {
            initial_size: 2,
            entries: vec![
                step(1.0, 2, 5, StepKind::Move),
                step(3.0, 5, 9, StepKind::Merge),
                step(3.5, 9, 9, StepKind::Move),
                step(4.25, 9, 9, StepKind::Move),
            ],
        };
        let alpha = -1.0;
        let out = time_change_intervals(&log, alpha).unwrap();
        assert_eq!(out.len(), 3);
        let total: f64 = out.iter().sum();
        let expect = 2.0 * 1.0 + 5.0 * 2.0 + 9.0 * 0.5 + 9.0 * 0.75;
        assert!((total - expect).abs() < 1e-12);
    }

    #[test]
    fn rejects_time_reversal() {
        let log = TaggedClusterLog {
            initial_size: 1,
            entries: vec![step(2.0, 1, 1, StepKind::Move), step(1.0, 1, 1, StepKind::Move)],
        };
        assert_eq!(
            time_change_intervals(&log, 0.0),
            Err(StatsError::NonMonotoneLog(1))
        );
    }
}
