use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::{CliError, Command, ExponentSource, Job, Thresholds};
use crate::ensemble::{
    derive_replica_seed, read_csv_path, run_ensemble, EnsembleConfig, EnsembleResult,
    ReplicaResult, ReplicaStatus,
};
use crate::lattice1d::{self, Config1D};
use crate::latticed;
use crate::rng_from_seed;
use crate::stats::{
    coalescence_scaling, difference_walk_oracle, engine_connection_probability, exp1_ks,
    fit_power_law, ks_critical_value, ks_distance, median, time_change_intervals,
    CoalescencePoint, Ecdf, Estimate, PowerLawFit,
};
use crate::theory::{growth_exponent, limit_cdf, limit_mean, LimitLawParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Comparison {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

/// One pass/fail check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub comparison: Comparison,
    pub pass: bool,
}

impl Verdict {
    pub fn at_most(name: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        Verdict {
            name: name.into(),
            statistic,
            threshold,
            comparison: Comparison::AtMost,
            // NaN never passes.
            pass: statistic <= threshold,
        }
    }

    pub fn at_least(name: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        Verdict {
            name: name.into(),
            statistic,
            threshold,
            comparison: Comparison::AtLeast,
            pass: statistic >= threshold,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.comparison {
            Comparison::AtMost => "<=",
            Comparison::AtLeast => ">=",
        };
        write!(
            f,
            "{} {}: {:.6} {} {:.6}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.statistic,
            op,
            self.threshold
        )
    }
}

fn contamination_fraction(result: &EnsembleResult) -> f64 {
    let n = result.replicas.len().max(1);
    result.counts().contaminated as f64 / n as f64
}

/// KS distance to the limit law, contamination rate and relative error of
/// the mean, all for `c0_size / sqrt(t)` at the last observation.
pub fn limit_law_verdicts(
    result: &EnsembleResult,
    p: f64,
    t: f64,
    th: &Thresholds,
) -> Result<Vec<Verdict>, CliError> {
    let params = LimitLawParams::new(p).map_err(|e| CliError::Other(e.to_string()))?;
    let k = result
        .replicas
        .first()
        .map(|r| r.series.len().saturating_sub(1))
        .unwrap_or(0);
    let scaled: Vec<f64> = result
        .clean_sizes_at(k)
        .into_iter()
        .map(|c| c as f64 / t.sqrt())
        .collect();
    let ecdf = Ecdf::new(scaled)?;
    let ks = ks_distance(&ecdf, |x| limit_cdf(x, &params));
    let mean = ecdf.samples().iter().sum::<f64>() / ecdf.n() as f64;
    let target = limit_mean(&params);
    Ok(vec![
        Verdict::at_most("ks distance to limit law", ks, th.ks_max),
        Verdict::at_most(
            "contaminated fraction",
            contamination_fraction(result),
            th.contamination_max,
        ),
        Verdict::at_most(
            "relative error of mean",
            (mean - target).abs() / target,
            th.mean_rel_tol,
        ),
    ])
}

/// `(t, median c0_size)` over clean replicas at each observation time.
pub fn growth_medians(result: &EnsembleResult) -> Vec<(f64, f64)> {
    let Some(first) = result.replicas.iter().find(|r| r.status == ReplicaStatus::Completed)
    else {
        return Vec::new();
    };
    first
        .series
        .times
        .iter()
        .enumerate()
        .filter_map(|(k, &t)| {
            let sizes: Vec<f64> = result.clean_sizes_at(k).iter().map(|&c| c as f64).collect();
            median(&sizes).map(|m| (t, m))
        })
        .collect()
}

pub fn exponent_verdicts(
    result: &EnsembleResult,
    alpha: f64,
    th: &Thresholds,
) -> Result<(PowerLawFit, Vec<Verdict>), CliError> {
    let points = growth_medians(result);
    let fit = fit_power_law(&points)?;
    let target = growth_exponent(alpha).map_err(|e| CliError::Other(e.to_string()))?;
    Ok((
        fit,
        vec![
            Verdict::at_most(
                format!("|slope - {target:.4}|"),
                (fit.slope - target).abs(),
                th.slope_tol,
            ),
            Verdict::at_most(
                "contaminated fraction",
                contamination_fraction(result),
                th.contamination_max,
            ),
        ],
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeChangeJob {
    /// Template; each run gets its own seed.
    pub config: Config1D,
    pub runs: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeChangeRun {
    pub run: usize,
    pub seed: u64,
    pub intervals: usize,
    pub ks: f64,
    pub critical: f64,
    pub stalled: bool,
}

impl TimeChangeJob {
    /// Runs every replica (in parallel on the current pool).
    pub fn execute(&self, level: f64) -> Result<Vec<TimeChangeRun>, CliError> {
        let mut config = self.config.clone();
        config.log_tagged_steps = true;
        (0..self.runs)
            .into_par_iter()
            .map(|run| {
                let seed = derive_replica_seed(self.master_seed, run as u64);
                let report = lattice1d::run(&config, &mut rng_from_seed(seed))?;
                let log = report.log.ok_or_else(|| CliError::Other("missing step log".into()))?;
                let intervals = time_change_intervals(&log, config.alpha)?;
                let (ks, critical) = if intervals.is_empty() {
                    (f64::NAN, f64::NAN)
                } else {
                    (exp1_ks(&intervals)?, ks_critical_value(intervals.len(), level))
                };
                Ok(TimeChangeRun {
                    run,
                    seed,
                    intervals: intervals.len(),
                    ks,
                    critical,
                    stalled: report.stalled,
                })
            })
            .collect()
    }
}

/// Fraction of runs with enough intervals whose KS statistic stays below
/// the critical value, and the smallest interval count.
pub fn timechange_verdicts(runs: &[TimeChangeRun], th: &Thresholds) -> Vec<Verdict> {
    let passed = runs
        .iter()
        .filter(|r| r.intervals >= th.timechange_min_intervals && r.ks < r.critical)
        .count();
    let min_intervals = runs.iter().map(|r| r.intervals).min().unwrap_or(0);
    vec![
        Verdict::at_least(
            "fraction of runs passing KS vs Exp(1)",
            passed as f64 / runs.len().max(1) as f64,
            th.timechange_pass_fraction,
        ),
        Verdict::at_least(
            "fewest intervals in a run",
            min_intervals as f64,
            th.timechange_min_intervals as f64,
        ),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleJob {
    pub ms: Vec<usize>,
    pub ps: Vec<f64>,
    pub t: f64,
    pub length: usize,
    pub engine_replicas: usize,
    pub oracle_replicas: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub m: usize,
    pub p: f64,
    pub engine: Estimate,
    pub oracle: Estimate,
    pub z: f64,
}

impl OracleJob {
    pub fn execute(&self) -> Result<Vec<OracleRow>, CliError> {
        let mut rows = Vec::new();
        for (i, &p) in self.ps.iter().enumerate() {
            let engine_seed = derive_replica_seed(self.master_seed, 2 * i as u64);
            let engine = engine_connection_probability(
                &self.ms,
                p,
                self.t,
                self.length,
                self.engine_replicas,
                engine_seed,
            )?;
            let mut rng = rng_from_seed(derive_replica_seed(self.master_seed, 2 * i as u64 + 1));
            for (&m, engine) in self.ms.iter().zip(engine) {
                let oracle = difference_walk_oracle(m, p, self.t, self.oracle_replicas, &mut rng)?;
                rows.push(OracleRow {
                    m,
                    p,
                    z: engine.z_score(&oracle),
                    engine,
                    oracle,
                });
            }
        }
        Ok(rows)
    }
}

pub fn oracle_verdicts(rows: &[OracleRow], th: &Thresholds) -> Vec<Verdict> {
    rows.iter()
        .map(|r| {
            Verdict::at_most(
                format!("m={} p={} |engine - oracle| / stderr", r.m, r.p),
                r.z,
                th.oracle_z_max,
            )
        })
        .collect()
}

/// Ratio of median coalescence times between the largest and smallest
/// torus. Below `alpha = -2` the ratio must stay small; otherwise it must
/// grow at least as fast as the contrast threshold.
pub fn blowup_verdicts(alpha: f64, points: &[CoalescencePoint], th: &Thresholds) -> Vec<Verdict> {
    let (Some(first), Some(last)) = (points.first(), points.last()) else {
        return Vec::new();
    };
    let ratio = last.median / first.median;
    let name = format!("T({})/T({})", last.length, first.length);
    if alpha <= -2.0 {
        vec![Verdict::at_most(name, ratio, th.blowup_ratio_max)]
    } else {
        vec![Verdict::at_least(name, ratio, th.contrast_ratio_min)]
    }
}

pub(super) fn execute(cmd: &Command) -> Result<Vec<Verdict>, CliError> {
    let out = &cmd.out;
    fs::create_dir_all(out)?;
    let th = &cmd.thresholds;
    match &cmd.job {
        Job::Simulate(config) => {
            let report = lattice1d::run(config, &mut rng_from_seed(config.seed))?;
            let single = EnsembleResult {
                digest: None,
                replicas: vec![ReplicaResult {
                    index: 0,
                    seed: config.seed,
                    status: ReplicaStatus::Completed,
                    series: report.series,
                }],
            };
            single.write_csv(BufWriter::new(File::create(out.join("series.csv"))?))?;
            if let Some(log) = &report.log {
                log.write_csv(BufWriter::new(File::create(out.join("tagged_steps.csv"))?))?;
            }
            println!(
                "events {} final time {} stalled {}",
                report.events, report.final_time, report.stalled
            );
            Ok(Vec::new())
        }
        Job::Ensemble(config) => {
            let result = run_saved(config, out)?;
            let c = result.counts();
            println!(
                "replicas {} completed {} empty {} failed {} contaminated {} saturated {}",
                result.replicas.len(),
                c.completed,
                c.empty,
                c.failed,
                c.contaminated,
                c.saturated
            );
            Ok(Vec::new())
        }
        Job::LimitLaw(config) => {
            let result = run_saved(config, out)?;
            let base = one_d(config);
            let verdicts = limit_law_verdicts(&result, base.p, base.t_max, th)?;
            let params = json!({
                "alpha": 0.0, "p": base.p, "t": base.t_max, "L": base.length,
                "replicas": config.replicas, "seed": config.master_seed,
            });
            write_verdicts(out, cmd.name, params, &verdicts)?;
            Ok(verdicts)
        }
        Job::Exponent { alpha, source } => {
            let result = match source {
                ExponentSource::Csv(path) => read_csv_path(path)?,
                ExponentSource::Run(config) => run_saved(config, out)?,
            };
            let (fit, verdicts) = exponent_verdicts(&result, *alpha, th)?;
            let mut w = csv::Writer::from_path(out.join("growth.csv"))?;
            w.write_record(["t", "median_c0_size"])?;
            for (t, m) in growth_medians(&result) {
                w.write_record([t.to_string(), m.to_string()])?;
            }
            w.flush()?;
            let params = json!({
                "alpha": alpha, "slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2,
            });
            write_verdicts(out, cmd.name, params, &verdicts)?;
            Ok(verdicts)
        }
        Job::TimeChange(job) => {
            let runs = job.execute(th.timechange_level)?;
            let mut w = csv::Writer::from_path(out.join("timechange.csv"))?;
            w.write_record(["run", "seed", "intervals", "ks", "critical", "stalled"])?;
            for r in &runs {
                w.write_record([
                    r.run.to_string(),
                    r.seed.to_string(),
                    r.intervals.to_string(),
                    r.ks.to_string(),
                    r.critical.to_string(),
                    r.stalled.to_string(),
                ])?;
            }
            w.flush()?;
            let verdicts = timechange_verdicts(&runs, th);
            let c = &job.config;
            let params = json!({
                "alpha": c.alpha, "p": c.p, "L": c.length, "t": c.t_max,
                "runs": job.runs, "seed": job.master_seed,
            });
            write_verdicts(out, cmd.name, params, &verdicts)?;
            Ok(verdicts)
        }
        Job::Oracle(job) => {
            let rows = job.execute()?;
            let mut w = csv::Writer::from_path(out.join("oracle.csv"))?;
            w.write_record([
                "m", "p", "engine_mean", "engine_stderr", "oracle_mean", "oracle_stderr", "z",
            ])?;
            for r in &rows {
                w.write_record([
                    r.m.to_string(),
                    r.p.to_string(),
                    r.engine.mean.to_string(),
                    r.engine.stderr.to_string(),
                    r.oracle.mean.to_string(),
                    r.oracle.stderr.to_string(),
                    r.z.to_string(),
                ])?;
            }
            w.flush()?;
            let verdicts = oracle_verdicts(&rows, th);
            let params = json!({
                "alpha": 0.0, "t": job.t, "L": job.length, "ms": job.ms, "ps": job.ps,
                "engine_replicas": job.engine_replicas, "oracle_replicas": job.oracle_replicas,
            });
            write_verdicts(out, cmd.name, params, &verdicts)?;
            Ok(verdicts)
        }
        Job::Blowup(config) => {
            let points = coalescence_scaling(config)?;
            let mut w = csv::Writer::from_path(out.join("blowup.csv"))?;
            w.write_record(["L", "replica", "coalescence_time"])?;
            for pt in &points {
                for (i, t) in pt.times.iter().enumerate() {
                    w.write_record([pt.length.to_string(), i.to_string(), t.to_string()])?;
                }
            }
            w.flush()?;
            let verdicts = blowup_verdicts(config.alpha, &points, th);
            let medians: Vec<_> = points
                .iter()
                .map(|p| json!({"L": p.length, "median": p.median, "stalled": p.stalled,
                                "unfinished": p.unfinished}))
                .collect();
            let params = json!({
                "alpha": config.alpha, "p": config.p, "replicas": config.replicas,
                "medians": medians,
            });
            write_verdicts(out, cmd.name, params, &verdicts)?;
            Ok(verdicts)
        }
        Job::Simulate2d(config) => {
            let report = latticed::run_d(config, &mut rng_from_seed(config.seed))?;
            let single = EnsembleResult {
                digest: None,
                replicas: vec![ReplicaResult {
                    index: 0,
                    seed: config.seed,
                    status: ReplicaStatus::Completed,
                    series: report.series,
                }],
            };
            single.write_csv(BufWriter::new(File::create(out.join("series.csv"))?))?;
            for (k, snap) in report.snapshots.iter().enumerate() {
                snap.write_csv(BufWriter::new(File::create(
                    out.join(format!("snapshot_{k}.csv")),
                )?))?;
            }
            let mut w = csv::Writer::from_path(out.join("sizes.csv"))?;
            w.write_record(["t", "size", "count"])?;
            for (t, h) in config.obs_times.iter().zip(&report.histograms) {
                for (size, count) in h {
                    w.write_record([t.to_string(), size.to_string(), count.to_string()])?;
                }
            }
            w.flush()?;
            println!("events {}", report.events);
            Ok(Vec::new())
        }
    }
}

fn one_d(config: &EnsembleConfig) -> &Config1D {
    match &config.base {
        crate::ensemble::BaseConfig::OneD(c) => c,
        crate::ensemble::BaseConfig::MultiD(_) => unreachable!("one-dimensional job"),
    }
}

fn run_saved(config: &EnsembleConfig, out: &Path) -> Result<EnsembleResult, CliError> {
    let mut config = config.clone();
    config.output_path = Some(out.join("ensemble.csv"));
    Ok(run_ensemble(&config)?)
}

fn write_verdicts(
    out: &Path,
    command: &str,
    params: serde_json::Value,
    verdicts: &[Verdict],
) -> Result<(), CliError> {
    let doc = json!({
        "command": command,
        "pass": verdicts.iter().all(|v| v.pass),
        "params": params,
        "verdicts": verdicts,
    });
    let mut f = BufWriter::new(File::create(out.join("verdict.json"))?);
    serde_json::to_writer_pretty(&mut f, &doc)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}
