use std::fs::File;
use std::path::PathBuf;

use clap::{Args, Parser};
use serde::{Deserialize, Serialize};

use super::{Command, ExponentSource, Job, OracleJob, TimeChangeJob, UsageError};
use crate::ensemble::{BaseConfig, EnsembleConfig};
use crate::lattice1d::Config1D;
use crate::latticed::ConfigD;
use crate::stats::BlowupConfig;

const DEFAULTS_HELP: &str = "\
Unset flags fall back to the --config file, then to per-command defaults:
  simulate, ensemble   alpha 0, p 0.5, L 8192, t-max 4096, replicas 100
  verify-limit-law     alpha 0, p 0.5, L 8192, t-max 4096, replicas 500
  verify-exponent      alpha 0, p 0.5, L 16384, obs-times 256,1024,4096,16384, replicas 200
  verify-timechange    alpha -1, p 0.5, L 16384, t-max 128, replicas 100
  oracle-compare       ms 1,5,10, p 0.3 and 0.5, L 512, t-max 100, replicas 10000,
                       oracle-replicas 100000
  blowup-scan          alpha -3, p 0.5, sizes 512,4096, replicas 50
  simulate-2d          d 2, alpha 0, p 0.3, L 64, t-max 1000
Times are in model time units (one unit = mean waiting time of a size-1
cluster); lengths are in lattice sites.";

#[derive(Debug, Parser)]
#[command(name = "cca", version, about = "Lattice cluster-cluster aggregation: simulation and verification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Subcommand,
}

#[derive(Debug, clap::Subcommand)]
pub enum Subcommand {
    /// Run one one-dimensional replica and write its observation series.
    #[command(after_help = DEFAULTS_HELP)]
    Simulate(Flags),
    /// Run an ensemble of one-dimensional replicas.
    #[command(after_help = DEFAULTS_HELP)]
    Ensemble(Flags),
    /// Compare the rescaled tagged-cluster size with the alpha = 0 limit law.
    #[command(after_help = DEFAULTS_HELP)]
    VerifyLimitLaw(Flags),
    /// Fit the growth exponent of the median tagged-cluster size.
    #[command(after_help = DEFAULTS_HELP)]
    VerifyExponent(Flags),
    /// Check that time-changed tagged step intervals are Exp(1).
    #[command(after_help = DEFAULTS_HELP)]
    VerifyTimechange(Flags),
    /// Compare engine connection probabilities with the difference-walk oracle.
    #[command(after_help = DEFAULTS_HELP)]
    OracleCompare(Flags),
    /// Measure how the full-coalescence time scales with the torus size.
    #[command(after_help = DEFAULTS_HELP)]
    BlowupScan(Flags),
    /// Run the model on a d-dimensional torus and write site snapshots.
    #[command(name = "simulate-2d", after_help = DEFAULTS_HELP)]
    Simulate2d(Flags),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Rate exponent: a cluster of n particles moves at rate n^-alpha.
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Initial occupation probability, in (0,1].
    #[arg(long)]
    pub p: Option<f64>,
    /// Torus side length [sites].
    #[arg(long = "L")]
    pub length: Option<usize>,
    /// Time horizon [model time].
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Observation times, comma separated, ascending [model time]
    /// (default: t-max).
    #[arg(long, value_delimiter = ',')]
    pub obs_times: Option<Vec<f64>>,
    /// Master seed; required by every randomized command.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of replicas (engine replicas for oracle-compare).
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Worker threads (default: all available cores).
    #[arg(long)]
    pub parallelism: Option<usize>,
    /// Upper bound M on cluster rates, min(n^-alpha, M) [1/model time].
    #[arg(long)]
    pub rate_cap: Option<f64>,
    /// Flag a replica once a cluster exceeds this fraction of the lattice
    /// (default 0.25).
    #[arg(long)]
    pub guard_fraction: Option<f64>,
    /// Output directory (default: cca-out).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON experiment file; explicit flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Read an existing ensemble CSV instead of simulating (verify-exponent).
    #[arg(long)]
    pub from_csv: Option<PathBuf>,
    /// Torus sizes for blowup-scan, comma separated [sites].
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Particle offsets m for oracle-compare, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub ms: Option<Vec<usize>>,
    /// Oracle replicas for oracle-compare.
    #[arg(long)]
    pub oracle_replicas: Option<usize>,
    /// Dimension for simulate-2d.
    #[arg(long)]
    pub d: Option<usize>,
    /// Give up on a coalescence run after this time [model time]
    /// (blowup-scan; default: no limit).
    #[arg(long)]
    pub t_limit: Option<f64>,
    /// Write the tagged cluster's step log (simulate).
    #[arg(long)]
    pub log_steps: bool,
}

/// Pass/fail thresholds. Every field can be set in the `thresholds` object
/// of a `--config` file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub ks_max: f64,
    pub contamination_max: f64,
    pub mean_rel_tol: f64,
    pub slope_tol: f64,
    pub blowup_ratio_max: f64,
    pub contrast_ratio_min: f64,
    pub timechange_level: f64,
    pub timechange_pass_fraction: f64,
    pub timechange_min_intervals: usize,
    pub oracle_z_max: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            ks_max: 0.08,
            contamination_max: 0.01,
            mean_rel_tol: 0.05,
            slope_tol: 0.07,
            blowup_ratio_max: 1.5,
            contrast_ratio_min: 8.0,
            timechange_level: 0.01,
            timechange_pass_fraction: 0.95,
            timechange_min_intervals: 500,
            oracle_z_max: 3.0,
        }
    }
}

/// Contents of a `--config` file; flag names in snake case.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub alpha: Option<f64>,
    pub p: Option<f64>,
    #[serde(rename = "L")]
    pub length: Option<usize>,
    pub t_max: Option<f64>,
    pub obs_times: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub replicas: Option<usize>,
    pub parallelism: Option<usize>,
    pub rate_cap: Option<f64>,
    pub guard_fraction: Option<f64>,
    pub out: Option<PathBuf>,
    pub from_csv: Option<PathBuf>,
    pub sizes: Option<Vec<usize>>,
    pub ms: Option<Vec<usize>>,
    /// Occupation probabilities for oracle-compare.
    pub ps: Option<Vec<f64>>,
    pub oracle_replicas: Option<usize>,
    pub d: Option<usize>,
    pub t_limit: Option<f64>,
    pub log_steps: Option<bool>,
    pub thresholds: Option<Thresholds>,
}

impl Settings {
    /// Overlays explicit flags on top of file values.
    fn overlay(mut self, f: Flags) -> Self {
        macro_rules! take {
            ($($field:ident),*) => {$(
                if f.$field.is_some() {
                    self.$field = f.$field;
                }
            )*};
        }
        take!(
            alpha, p, length, t_max, obs_times, seed, replicas, parallelism, rate_cap,
            guard_fraction, out, from_csv, sizes, ms, oracle_replicas, d, t_limit
        );
        if f.log_steps {
            self.log_steps = Some(true);
        }
        self
    }
}

fn invalid(msg: impl Into<String>) -> UsageError {
    UsageError::Invalid(msg.into())
}

pub(super) fn resolve(cli: Cli) -> Result<Command, UsageError> {
    let (name, flags) = match cli.command {
        Subcommand::Simulate(f) => ("simulate", f),
        Subcommand::Ensemble(f) => ("ensemble", f),
        Subcommand::VerifyLimitLaw(f) => ("verify-limit-law", f),
        Subcommand::VerifyExponent(f) => ("verify-exponent", f),
        Subcommand::VerifyTimechange(f) => ("verify-timechange", f),
        Subcommand::OracleCompare(f) => ("oracle-compare", f),
        Subcommand::BlowupScan(f) => ("blowup-scan", f),
        Subcommand::Simulate2d(f) => ("simulate-2d", f),
    };
    let file = match &flags.config {
        Some(path) => {
            let f = File::open(path)
                .map_err(|e| invalid(format!("cannot open {}: {e}", path.display())))?;
            serde_json::from_reader(f)
                .map_err(|e| invalid(format!("bad config {}: {e}", path.display())))?
        }
        None => Settings::default(),
    };
    let s = file.overlay(flags);
    let parallelism = match s.parallelism {
        Some(0) => return Err(invalid("parallelism must be positive")),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let job = build_job(name, &s, parallelism)?;
    let randomized = !matches!(job, Job::Exponent { source: ExponentSource::Csv(_), .. });
    if randomized && s.seed.is_none() {
        return Err(invalid(format!("{name} requires an explicit --seed")));
    }
    Ok(Command {
        name,
        job,
        out: s.out.clone().unwrap_or_else(|| PathBuf::from("cca-out")),
        parallelism,
        thresholds: s.thresholds.unwrap_or_default(),
    })
}

struct Defaults {
    alpha: f64,
    p: f64,
    length: usize,
    t_max: f64,
    replicas: usize,
}

fn config_1d(s: &Settings, d: Defaults) -> Result<Config1D, UsageError> {
    let t_max = s
        .t_max
        .or_else(|| s.obs_times.as_ref().and_then(|o| o.last().copied()))
        .unwrap_or(d.t_max);
    let mut c = Config1D::new(
        s.alpha.unwrap_or(d.alpha),
        s.p.unwrap_or(d.p),
        s.length.unwrap_or(d.length),
        t_max,
    );
    if let Some(o) = &s.obs_times {
        c.obs_times = o.clone();
    }
    c.seed = s.seed.unwrap_or(0);
    c.rate_cap = s.rate_cap;
    if let Some(g) = s.guard_fraction {
        c.guard_fraction = g;
    }
    c.log_tagged_steps = s.log_steps.unwrap_or(false);
    c.validate().map_err(engine_msg)?;
    Ok(c)
}

fn engine_msg(e: crate::error::EngineError) -> UsageError {
    match e {
        crate::error::EngineError::InvalidConfig(m) => invalid(m),
        other => invalid(other.to_string()),
    }
}

fn ensemble(s: &Settings, d: Defaults, parallelism: usize) -> Result<EnsembleConfig, UsageError> {
    let replicas = s.replicas.unwrap_or(d.replicas);
    if replicas == 0 {
        return Err(invalid("replicas must be positive"));
    }
    let base = config_1d(s, d)?;
    let mut e = EnsembleConfig::new(BaseConfig::OneD(base), replicas, s.seed.unwrap_or(0));
    e.parallelism = parallelism;
    Ok(e)
}

fn build_job(name: &str, s: &Settings, parallelism: usize) -> Result<Job, UsageError> {
    let standard = Defaults {
        alpha: 0.0,
        p: 0.5,
        length: 8192,
        t_max: 4096.0,
        replicas: 100,
    };
    Ok(match name {
        "simulate" => Job::Simulate(config_1d(s, standard)?),
        "ensemble" => Job::Ensemble(ensemble(s, standard, parallelism)?),
        "verify-limit-law" => {
            if s.alpha.is_some_and(|a| a != 0.0) {
                return Err(invalid("verify-limit-law requires alpha = 0"));
            }
            let mut e = ensemble(s, Defaults { replicas: 500, ..standard }, parallelism)?;
            if let BaseConfig::OneD(c) = &mut e.base {
                if c.p >= 1.0 {
                    return Err(invalid("verify-limit-law requires p < 1"));
                }
                if c.t_max <= 0.0 {
                    return Err(invalid("verify-limit-law requires t-max > 0"));
                }
                c.obs_times = vec![c.t_max];
            }
            Job::LimitLaw(e)
        }
        "verify-exponent" => {
            let alpha = s.alpha.unwrap_or(0.0);
            let source = match &s.from_csv {
                Some(path) => ExponentSource::Csv(path.clone()),
                None => {
                    let mut s = s.clone();
                    if s.obs_times.is_none() {
                        s.obs_times = Some(vec![256.0, 1024.0, 4096.0, 16384.0]);
                    }
                    let d = Defaults {
                        length: 16384,
                        t_max: 16384.0,
                        replicas: 200,
                        ..standard
                    };
                    ExponentSource::Run(ensemble(&s, d, parallelism)?)
                }
            };
            if alpha <= -2.0 {
                return Err(invalid("growth exponent is undefined for alpha <= -2"));
            }
            Job::Exponent { alpha, source }
        }
        "verify-timechange" => {
            let mut s = s.clone();
            s.log_steps = Some(true);
            let d = Defaults {
                alpha: -1.0,
                length: 16384,
                t_max: 128.0,
                ..standard
            };
            let mut config = config_1d(&s, d)?;
            config.obs_times.clear();
            Job::TimeChange(TimeChangeJob {
                config,
                runs: positive(s.replicas.unwrap_or(100), "replicas")?,
                master_seed: s.seed.unwrap_or(0),
            })
        }
        "oracle-compare" => {
            let ps = match (s.p, &s.ps) {
                (Some(p), _) => vec![p],
                (None, Some(ps)) => ps.clone(),
                (None, None) => vec![0.3, 0.5],
            };
            if ps.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
                return Err(invalid("p must lie in (0,1) for oracle-compare"));
            }
            if s.alpha.is_some_and(|a| a != 0.0) {
                return Err(invalid("oracle-compare requires alpha = 0"));
            }
            let ms = s.ms.clone().unwrap_or_else(|| vec![1, 5, 10]);
            if ms.is_empty() || ms.contains(&0) {
                return Err(invalid("ms must be positive offsets"));
            }
            let t = s.t_max.unwrap_or(100.0);
            if !(t >= 0.0 && t.is_finite()) {
                return Err(invalid("t-max must be a nonnegative real"));
            }
            Job::Oracle(OracleJob {
                ms,
                ps,
                t,
                length: s.length.unwrap_or(512),
                engine_replicas: positive(s.replicas.unwrap_or(10_000), "replicas")?,
                oracle_replicas: positive(s.oracle_replicas.unwrap_or(100_000), "oracle-replicas")?,
                master_seed: s.seed.unwrap_or(0),
            })
        }
        "blowup-scan" => {
            let sizes = s.sizes.clone().unwrap_or_else(|| vec![512, 4096]);
            if sizes.len() < 2 || sizes.iter().any(|&l| l < 4) {
                return Err(invalid("blowup-scan needs at least two sizes, each >= 4"));
            }
            let p = s.p.unwrap_or(0.5);
            if !(p > 0.0 && p <= 1.0) {
                return Err(invalid("p must lie in (0,1]"));
            }
            Job::Blowup(BlowupConfig {
                alpha: s.alpha.unwrap_or(-3.0),
                p,
                sizes,
                replicas: positive(s.replicas.unwrap_or(50), "replicas")?,
                master_seed: s.seed.unwrap_or(0),
                t_limit: s.t_limit.unwrap_or(f64::INFINITY),
            })
        }
        "simulate-2d" => {
            let t_max = s.t_max.unwrap_or(1000.0);
            let mut c = ConfigD::new(
                s.d.unwrap_or(2),
                s.alpha.unwrap_or(0.0),
                s.p.unwrap_or(0.3),
                s.length.unwrap_or(64),
                t_max,
            );
            if let Some(o) = &s.obs_times {
                c.obs_times = o.clone();
            }
            c.seed = s.seed.unwrap_or(0);
            c.rate_cap = s.rate_cap;
            if let Some(g) = s.guard_fraction {
                c.guard_fraction = g;
            }
            c.snapshots = true;
            c.validate().map_err(engine_msg)?;
            Job::Simulate2d(c)
        }
        other => return Err(invalid(format!("unknown command {other}"))),
    })
}

fn positive(n: usize, what: &str) -> Result<usize, UsageError> {
    if n == 0 {
        Err(invalid(format!("{what} must be positive")))
    } else {
        Ok(n)
    }
}
