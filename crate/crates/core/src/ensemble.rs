//! Seeded, parallel replica orchestration and CSV/JSON persistence.
//!
//! Replica `i` draws from its own stream seeded by
//! [`derive_replica_seed`]`(master_seed, i)`, and results are collected in
//! replica order, so the output does not depend on the thread count.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::error::EngineError;
use crate::lattice1d::{self, Config1D, ObservationSeries};
use crate::latticed::{self, ConfigD};
use crate::rng_from_seed;

pub const CSV_COLUMNS: [&str; 8] = [
    "replica",
    "seed",
    "t",
    "c0_size",
    "n_clusters",
    "max_size",
    "contaminated",
    "saturated",
];

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("invalid ensemble configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV schema mismatch: missing column `{0}`")]
    SchemaMismatch(String),
    #[error("malformed CSV at row {row}: {message}")]
    Malformed { row: usize, message: String },
}

/// Seed of replica `index`: a bijective 64-bit mix of the master seed and
/// the index, so distinct indices never share a stream.
pub fn derive_replica_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum BaseConfig {
    #[serde(rename = "1d")]
    OneD(Config1D),
    #[serde(rename = "nd")]
    MultiD(ConfigD),
}

impl BaseConfig {
    fn obs_times(&self) -> &[f64] {
        match self {
            BaseConfig::OneD(c) => &c.obs_times,
            BaseConfig::MultiD(c) => &c.obs_times,
        }
    }

    fn validate(&self) -> Result<(), EngineError> {
        match self {
            BaseConfig::OneD(c) => c.validate(),
            BaseConfig::MultiD(c) => c.validate(),
        }
    }

    fn run_replica(&self, seed: u64) -> Result<ObservationSeries, EngineError> {
        let mut rng = rng_from_seed(seed);
        match self {
            BaseConfig::OneD(c) => lattice1d::run(c, &mut rng).map(|r| r.series),
            BaseConfig::MultiD(c) => latticed::run_d(c, &mut rng).map(|r| r.series),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub base: BaseConfig,
    pub replicas: usize,
    pub master_seed: u64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
}

fn default_parallelism() -> usize {
    1
}

impl EnsembleConfig {
    pub fn new(base: BaseConfig, replicas: usize, master_seed: u64) -> Self {
        EnsembleConfig {
            base,
            replicas,
            master_seed,
            parallelism: 1,
            output_path: None,
        }
    }

    /// SHA-256 of the canonical JSON of everything that influences the
    /// numbers (thread count and output location excluded).
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(&self.identity()).expect("config serializes");
        let hash = Sha256::digest(&json);
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn identity(&self) -> ConfigIdentity<'_> {
        ConfigIdentity {
            base: &self.base,
            replicas: self.replicas,
            master_seed: self.master_seed,
        }
    }
}

#[derive(Serialize)]
struct ConfigIdentity<'a> {
    base: &'a BaseConfig,
    replicas: usize,
    master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "status", content = "message")]
pub enum ReplicaStatus {
    Completed,
    /// No site was occupied; recorded as all-zero observations.
    Empty,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaResult {
    pub index: usize,
    pub seed: u64,
    pub status: ReplicaStatus,
    pub series: ObservationSeries,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagCounts {
    pub completed: usize,
    pub empty: usize,
    pub failed: usize,
    pub contaminated: usize,
    pub saturated: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub digest: Option<String>,
    pub replicas: Vec<ReplicaResult>,
}

impl EnsembleResult {
    pub fn counts(&self) -> FlagCounts {
        let mut c = FlagCounts::default();
        for r in &self.replicas {
            match r.status {
                ReplicaStatus::Completed => c.completed += 1,
                ReplicaStatus::Empty => c.empty += 1,
                ReplicaStatus::Failed(_) => c.failed += 1,
            }
            c.contaminated += r.series.contaminated as usize;
            c.saturated += r.series.saturated as usize;
        }
        c
    }

    /// Tagged-cluster sizes at observation `k` over replicas that ran and
    /// stayed clear of the guard.
    pub fn clean_sizes_at(&self, k: usize) -> Vec<usize> {
        self.replicas
            .iter()
            .filter(|r| r.status == ReplicaStatus::Completed && !r.series.contaminated)
            .filter_map(|r| r.series.c0_size.get(k).copied())
            .collect()
    }

    /// One row per (replica, observation time). Failed replicas are omitted;
    /// they are listed in the JSON summary instead.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), EnsembleError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_COLUMNS)?;
        for r in &self.replicas {
            if matches!(r.status, ReplicaStatus::Failed(_)) {
                continue;
            }
            let s = &r.series;
            for k in 0..s.len() {
                out.write_record([
                    r.index.to_string(),
                    r.seed.to_string(),
                    format_time(s.times[k]),
                    s.c0_size[k].to_string(),
                    s.n_clusters[k].to_string(),
                    s.max_size[k].to_string(),
                    s.contaminated.to_string(),
                    s.saturated.to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_summary<W: Write>(&self, config: &EnsembleConfig, w: W) -> Result<(), EnsembleError> {
        let failures: Vec<FailureEntry> = self
            .replicas
            .iter()
            .filter_map(|r| match &r.status {
                ReplicaStatus::Failed(m) => Some(FailureEntry {
                    replica: r.index,
                    seed: r.seed,
                    message: m.clone(),
                }),
                _ => None,
            })
            .collect();
        let summary = Summary {
            config: config.identity(),
            digest: self.digest.clone(),
            counts: self.counts(),
            failures,
        };
        serde_json::to_writer_pretty(w, &summary)?;
        Ok(())
    }

    /// Writes `<path>` (CSV) and `<path>.json` (summary).
    pub fn save(&self, config: &EnsembleConfig, path: &Path) -> Result<(), EnsembleError> {
        self.write_csv(BufWriter::new(File::create(path)?))?;
        let mut json = BufWriter::new(File::create(summary_path(path))?);
        self.write_summary(config, &mut json)?;
        json.write_all(b"\n")?;
        Ok(())
    }
}

/// Sidecar location for the ensemble CSV at `path`.
pub fn summary_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn format_time(t: f64) -> String {
    // `{}` on f64 is the shortest representation that round-trips.
    format!("{t}")
}

#[derive(Serialize)]
struct FailureEntry {
    replica: usize,
    seed: u64,
    message: String,
}

#[derive(Serialize)]
struct Summary<'a> {
    config: ConfigIdentity<'a>,
    digest: Option<String>,
    counts: FlagCounts,
    failures: Vec<FailureEntry>,
}

pub fn run_ensemble(config: &EnsembleConfig) -> Result<EnsembleResult, EnsembleError> {
    if config.replicas == 0 {
        return Err(EnsembleError::InvalidConfig("replicas must be positive".into()));
    }
    if config.parallelism == 0 {
        return Err(EnsembleError::InvalidConfig("parallelism must be positive".into()));
    }
    config.base.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| EnsembleError::InvalidConfig(e.to_string()))?;
    let replicas = pool.install(|| {
        (0..config.replicas)
            .into_par_iter()
            .map(|i| run_one(&config.base, config.master_seed, i))
            .collect()
    });
    let result = EnsembleResult {
        digest: Some(config.digest()),
        replicas,
    };
    if let Some(path) = &config.output_path {
        result.save(config, path)?;
    }
    Ok(result)
}

fn run_one(base: &BaseConfig, master: u64, index: usize) -> ReplicaResult {
    let seed = derive_replica_seed(master, index as u64);
    let (status, series) = match base.run_replica(seed) {
        Ok(series) => (ReplicaStatus::Completed, series),
        Err(EngineError::EmptyWorld) => (ReplicaStatus::Empty, zero_series(base.obs_times())),
        Err(e) => (ReplicaStatus::Failed(e.to_string()), ObservationSeries::with_capacity(0)),
    };
    ReplicaResult {
        index,
        seed,
        status,
        series,
    }
}

fn zero_series(times: &[f64]) -> ObservationSeries {
    let n = times.len();
    ObservationSeries {
        times: times.to_vec(),
        c0_size: vec![0; n],
        n_clusters: vec![0; n],
        max_size: vec![0; n],
        contaminated: false,
        saturated: false,
    }
}

/// Reads an ensemble CSV back. Columns are matched by name; a file holding
/// only the header yields no replicas. Replicas whose every row reports an
/// empty lattice come back as [`ReplicaStatus::Empty`].
pub fn read_csv<R: Read>(r: R) -> Result<EnsembleResult, EnsembleError> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let mut idx = [0usize; 8];
    for (slot, name) in idx.iter_mut().zip(CSV_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| EnsembleError::SchemaMismatch(name.to_string()))?;
    }
    let mut replicas: Vec<ReplicaResult> = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |k: usize| rec.get(idx[k]).unwrap_or("").trim();
        let bad = |k: usize, e: &dyn std::fmt::Display| EnsembleError::Malformed {
            row: row + 1,
            message: format!("column `{}`: {e}", CSV_COLUMNS[k]),
        };
        let int = |k: usize| field(k).parse::<usize>().map_err(|e| bad(k, &e));
        let flag = |k: usize| field(k).parse::<bool>().map_err(|e| bad(k, &e));
        let index = int(0)?;
        let seed = field(1).parse::<u64>().map_err(|e| bad(1, &e))?;
        let t = field(2).parse::<f64>().map_err(|e| bad(2, &e))?;
        let (c0, n, max) = (int(3)?, int(4)?, int(5)?);
        let (contaminated, saturated) = (flag(6)?, flag(7)?);
        if replicas.last().is_none_or(|r| r.index != index) {
            replicas.push(ReplicaResult {
                index,
                seed,
                status: ReplicaStatus::Completed,
                series: ObservationSeries::with_capacity(0),
            });
        }
        let r = replicas.last_mut().expect("just pushed");
        r.series.push(t, c0, n, max);
        r.series.contaminated |= contaminated;
        r.series.saturated |= saturated;
    }
    for r in &mut replicas {
        if r.series.n_clusters.iter().all(|&n| n == 0) {
            r.status = ReplicaStatus::Empty;
        }
    }
    Ok(EnsembleResult {
        digest: None,
        replicas,
    })
}

pub fn read_csv_path(path: &Path) -> Result<EnsembleResult, EnsembleError> {
    read_csv(File::open(path)?)
}
