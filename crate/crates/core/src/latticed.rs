//! The cluster-cluster model on the `d`-dimensional torus `(Z/LZ)^d`, `d >= 2`.
//!
//! A ringing cluster picks one of the `2d` unit directions. If every
//! translated site is vacant (or its own) the whole cluster, edges included,
//! moves. Otherwise it stays put, one of the lattice edges `{u, u+e}` joining
//! it to an inhibiting cluster is chosen uniformly and opened, and the two
//! clusters merge. Unlike the one-dimensional model, touching clusters do not
//! merge on contact.

use std::collections::{BTreeMap, BinaryHeap};
use std::io::{self, Write};

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{EngineError, EngineResult};
use crate::lattice1d::{cluster_rate, default_guard_fraction, validate_common, Event};
use crate::lattice1d::ObservationSeries;

pub const DEFAULT_SITE_BUDGET: usize = 1 << 24;

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigD {
    pub d: usize,
    pub alpha: f64,
    pub p: f64,
    /// Side length per axis.
    #[serde(rename = "L")]
    pub length: usize,
    pub t_max: f64,
    #[serde(default)]
    pub obs_times: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub rate_cap: Option<f64>,
    #[serde(default = "default_guard_fraction")]
    pub guard_fraction: f64,
    /// Upper bound on `L^d`.
    #[serde(default = "default_budget")]
    pub site_budget: usize,
    /// Record a site map at every observation time.
    #[serde(default)]
    pub snapshots: bool,
}

fn default_budget() -> usize {
    DEFAULT_SITE_BUDGET
}

impl ConfigD {
    pub fn new(d: usize, alpha: f64, p: f64, length: usize, t_max: f64) -> Self {
        ConfigD {
            d,
            alpha,
            p,
            length,
            t_max,
            obs_times: vec![t_max],
            seed: 0,
            rate_cap: None,
            guard_fraction: default_guard_fraction(),
            site_budget: DEFAULT_SITE_BUDGET,
            snapshots: false,
        }
    }

    pub fn validate(&self) -> EngineResult<()> {
        validate_common(self.alpha, self.p, self.t_max, &self.obs_times, self.rate_cap)?;
        if self.d < 2 {
            return Err(EngineError::InvalidConfig("d must be at least 2".into()));
        }
        if self.length < 2 {
            return Err(EngineError::InvalidConfig("L must be at least 2".into()));
        }
        if !(self.guard_fraction > 0.0 && self.guard_fraction <= 1.0) {
            return Err(EngineError::InvalidConfig(
                "guard fraction must lie in (0,1]".into(),
            ));
        }
        let sites = self.sites().ok_or(EngineError::TooLarge {
            sites: usize::MAX,
            budget: self.site_budget,
        })?;
        if sites > self.site_budget || sites >= NONE as usize {
            return Err(EngineError::TooLarge {
                sites,
                budget: self.site_budget,
            });
        }
        Ok(())
    }

    /// `L^d`, or `None` on overflow.
    pub fn sites(&self) -> Option<usize> {
        let mut n: usize = 1;
        for _ in 0..self.d {
            n = n.checked_mul(self.length)?;
        }
        Some(n)
    }
}

/// An unordered lattice edge, stored with the smaller site index first.
pub type Edge = (usize, usize);

fn edge(u: usize, v: usize) -> Edge {
    (u.min(v), u.max(v))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterD {
    pub id: u32,
    pub gen: u32,
    pub rate: f64,
    /// Linear site indices.
    pub sites: Vec<usize>,
    /// Open edges inside the cluster.
    pub internal_edges: Vec<Edge>,
    alive: bool,
}

impl ClusterD {
    pub fn size(&self) -> usize {
        self.sites.len()
    }
}

/// One of the `2d` unit directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Direction {
    pub axis: usize,
    pub positive: bool,
}

impl Direction {
    fn from_index(i: usize) -> Self {
        Direction {
            axis: i / 2,
            positive: i % 2 == 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MoveOutcome {
    Translated,
    Merged {
        blocker: u32,
        edge: Edge,
        new_id: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoveReport {
    pub mover: u32,
    pub direction: Direction,
    pub outcome: MoveOutcome,
}

#[derive(Debug, Clone)]
pub struct WorldD {
    d: usize,
    length: usize,
    alpha: f64,
    rate_cap: Option<f64>,
    occupancy: Vec<u32>,
    clusters: Vec<ClusterD>,
    queue: BinaryHeap<Event>,
    now: f64,
    n_clusters: usize,
    max_size: usize,
    total_particles: usize,
    tagged_id: u32,
    saturated: bool,
}

impl WorldD {
    pub fn init<R: Rng + ?Sized>(config: &ConfigD, rng: &mut R) -> EngineResult<Self> {
        config.validate()?;
        let n = config.sites().expect("validated");
        let occupied: Vec<usize> = (0..n)
            .filter(|_| config.p >= 1.0 || rng.random_bool(config.p))
            .collect();
        Self::from_sites(config, &occupied, rng)
    }

    /// Builds a world from explicit occupied sites (linear indices).
    pub fn from_sites<R: Rng + ?Sized>(
        config: &ConfigD,
        occupied: &[usize],
        rng: &mut R,
    ) -> EngineResult<Self> {
        config.validate()?;
        let n = config.sites().expect("validated");
        if occupied.is_empty() {
            return Err(EngineError::EmptyWorld);
        }
        let mut world = WorldD {
            d: config.d,
            length: config.length,
            alpha: config.alpha,
            rate_cap: config.rate_cap,
            occupancy: vec![NONE; n],
            clusters: Vec::new(),
            queue: BinaryHeap::new(),
            now: 0.0,
            n_clusters: 0,
            max_size: 0,
            total_particles: 0,
            tagged_id: 0,
            saturated: false,
        };
        const UNLABELED: u32 = NONE - 1;
        for &s in occupied {
            if s >= n {
                return Err(EngineError::InvalidConfig(format!("site {s} out of range")));
            }
            world.occupancy[s] = UNLABELED;
        }
        world.total_particles = world.occupancy.iter().filter(|&&o| o != NONE).count();

        // Flood fill nearest-neighbour components in index order.
        let mut stack = Vec::new();
        for start in 0..n {
            if world.occupancy[start] != UNLABELED {
                continue;
            }
            let id = world.clusters.len() as u32;
            let mut sites = Vec::new();
            let mut edges = Vec::new();
            world.occupancy[start] = id;
            stack.push(start);
            while let Some(u) = stack.pop() {
                sites.push(u);
                for dir in 0..2 * world.d {
                    let v = world.shift(u, Direction::from_index(dir));
                    match world.occupancy[v] {
                        UNLABELED => {
                            world.occupancy[v] = id;
                            stack.push(v);
                            edges.push(edge(u, v));
                        }
                        o if o == id => edges.push(edge(u, v)),
                        _ => {}
                    }
                }
            }
            sites.sort_unstable();
            edges.sort_unstable();
            edges.dedup();
            world.clusters.push(ClusterD {
                id,
                gen: 0,
                rate: cluster_rate(sites.len(), world.alpha, world.rate_cap),
                sites,
                internal_edges: edges,
                alive: true,
            });
            world.n_clusters += 1;
        }
        world.max_size = world.clusters.iter().map(|c| c.size()).max().unwrap_or(0);
        world.saturated = world.total_particles == n && world.n_clusters == 1;
        world.tagged_id = world.occupancy[world.nearest_occupied_to_origin()];
        if !world.saturated {
            for id in 0..world.clusters.len() as u32 {
                world.schedule(id, rng);
            }
        }
        Ok(world)
    }

    fn nearest_occupied_to_origin(&self) -> usize {
        (0..self.occupancy.len())
            .filter(|&s| self.occupancy[s] != NONE)
            .min_by_key(|&s| {
                let dist: usize = self
                    .coords(s)
                    .iter()
                    .map(|&c| c.min(self.length - c))
                    .sum();
                (dist, s)
            })
            .expect("nonempty")
    }

    fn schedule<R: Rng + ?Sized>(&mut self, id: u32, rng: &mut R) {
        let c = &self.clusters[id as usize];
        let wait: f64 = rng.sample::<f64, _>(Exp1) / c.rate;
        self.queue.push(Event {
            t: self.now + wait,
            cluster_id: id,
            gen: c.gen,
        });
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }

    pub fn total_particles(&self) -> usize {
        self.total_particles
    }

    pub fn is_saturated(&self) -> bool {
        self.saturated
    }

    pub fn tagged_id(&self) -> u32 {
        self.tagged_id
    }

    pub fn tagged_size(&self) -> usize {
        self.clusters[self.tagged_id as usize].size()
    }

    pub fn cluster(&self, id: u32) -> Option<&ClusterD> {
        self.clusters.get(id as usize).filter(|c| c.alive)
    }

    pub fn clusters(&self) -> impl Iterator<Item = &ClusterD> + '_ {
        self.clusters.iter().filter(|c| c.alive)
    }

    /// Cluster id at a site, if occupied.
    pub fn occupant(&self, site: usize) -> Option<u32> {
        self.occupancy.get(site).copied().filter(|&o| o != NONE)
    }

    pub fn next_event_time(&self) -> Option<f64> {
        self.queue.peek().map(|e| e.t)
    }

    pub fn coords(&self, site: usize) -> Vec<usize> {
        let mut s = site;
        (0..self.d)
            .map(|_| {
                let c = s % self.length;
                s /= self.length;
                c
            })
            .collect()
    }

    pub fn site(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .rev()
            .fold(0, |acc, &c| acc * self.length + c % self.length)
    }

    fn stride(&self, axis: usize) -> usize {
        self.length.pow(axis as u32)
    }

    pub fn shift(&self, site: usize, dir: Direction) -> usize {
        let stride = self.stride(dir.axis);
        let c = (site / stride) % self.length;
        let nc = if dir.positive {
            (c + 1) % self.length
        } else {
            (c + self.length - 1) % self.length
        };
        site - c * stride + nc * stride
    }

    /// Lattice edges `{u, u+e}` from the mover into other clusters, with the
    /// cluster at the far end.
    pub fn candidate_block_edges(&self, mover: u32, dir: Direction) -> EngineResult<Vec<(Edge, u32)>> {
        let c = self.cluster(mover).ok_or(EngineError::UnknownCluster(mover))?;
        let out: Vec<(Edge, u32)> = c
            .sites
            .iter()
            .filter_map(|&u| {
                let v = self.shift(u, dir);
                match self.occupancy[v] {
                    o if o != NONE && o != mover => Some((edge(u, v), o)),
                    _ => None,
                }
            })
            .collect();
        if out.is_empty() {
            return Err(EngineError::NotBlocked(mover));
        }
        Ok(out)
    }

    /// One clock ring of `mover`: draw a direction, then translate or merge.
    pub fn attempt_move<R: Rng + ?Sized>(&mut self, mover: u32, rng: &mut R) -> EngineResult<MoveReport> {
        if self.cluster(mover).is_none() {
            return Err(EngineError::UnknownCluster(mover));
        }
        let dir = Direction::from_index(rng.random_range(0..2 * self.d));
        self.apply_move(mover, dir, rng)
    }

    /// Translates or merges in a fixed direction; then reschedules.
    pub fn apply_move<R: Rng + ?Sized>(
        &mut self,
        mover: u32,
        dir: Direction,
        rng: &mut R,
    ) -> EngineResult<MoveReport> {
        let outcome = match self.candidate_block_edges(mover, dir) {
            Err(EngineError::NotBlocked(_)) => {
                self.translate(mover, dir);
                self.schedule(mover, rng);
                MoveOutcome::Translated
            }
            Err(e) => return Err(e),
            Ok(candidates) => {
                let (e, blocker) = candidates[rng.random_range(0..candidates.len())];
                let new_id = self.merge(mover, blocker, e)?;
                self.schedule(new_id, rng);
                MoveOutcome::Merged {
                    blocker,
                    edge: e,
                    new_id,
                }
            }
        };
        Ok(MoveReport {
            mover,
            direction: dir,
            outcome,
        })
    }

    fn translate(&mut self, id: u32, dir: Direction) {
        let old = std::mem::take(&mut self.clusters[id as usize].sites);
        for &u in &old {
            self.occupancy[u] = NONE;
        }
        let mut moved: Vec<usize> = old.iter().map(|&u| self.shift(u, dir)).collect();
        for &v in &moved {
            self.occupancy[v] = id;
        }
        moved.sort_unstable();
        let edges: Vec<Edge> = self.clusters[id as usize]
            .internal_edges
            .iter()
            .map(|&(u, v)| edge(self.shift(u, dir), self.shift(v, dir)))
            .collect();
        let c = &mut self.clusters[id as usize];
        c.sites = moved;
        c.internal_edges = edges;
    }

    /// Joins `a` and `b` through the open edge `e`, under a fresh id.
    pub fn merge(&mut self, a: u32, b: u32, e: Edge) -> EngineResult<u32> {
        let ca = self.cluster(a).ok_or(EngineError::UnknownCluster(a))?;
        let cb = self.cluster(b).ok_or(EngineError::UnknownCluster(b))?;
        if a == b {
            return Err(EngineError::NotAdjacent(a, b));
        }
        let gen = ca.gen.max(cb.gen) + 1;
        let id = self.clusters.len() as u32;
        let mut sites = std::mem::take(&mut self.clusters[a as usize].sites);
        sites.append(&mut self.clusters[b as usize].sites);
        sites.sort_unstable();
        let mut edges = std::mem::take(&mut self.clusters[a as usize].internal_edges);
        edges.append(&mut self.clusters[b as usize].internal_edges);
        edges.push(e);
        edges.sort_unstable();
        for &s in &sites {
            self.occupancy[s] = id;
        }
        self.clusters[a as usize].alive = false;
        self.clusters[b as usize].alive = false;
        let size = sites.len();
        self.clusters.push(ClusterD {
            id,
            gen,
            rate: cluster_rate(size, self.alpha, self.rate_cap),
            sites,
            internal_edges: edges,
            alive: true,
        });
        self.n_clusters -= 1;
        self.max_size = self.max_size.max(size);
        if self.tagged_id == a || self.tagged_id == b {
            self.tagged_id = id;
        }
        Ok(id)
    }

    /// Pops the earliest event; `Ok(None)` for a stale one.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> EngineResult<Option<MoveReport>> {
        let ev = self.queue.pop().ok_or(EngineError::QueueEmpty)?;
        let live = self
            .clusters
            .get(ev.cluster_id as usize)
            .is_some_and(|c| c.alive && c.gen == ev.gen);
        if !live {
            return Ok(None);
        }
        self.now = ev.t;
        self.attempt_move(ev.cluster_id, rng).map(Some)
    }

    /// Occupancy map and cluster site sets agree; clusters are connected
    /// through their open edges.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen = vec![false; self.occupancy.len()];
        let mut total = 0;
        for c in self.clusters() {
            total += c.size();
            for &s in &c.sites {
                if seen[s] {
                    return Err(format!("site {s} claimed twice"));
                }
                seen[s] = true;
                if self.occupancy[s] != c.id {
                    return Err(format!("site {s} labelled {} not {}", self.occupancy[s], c.id));
                }
            }
            if c.internal_edges.len() + 1 < c.size() {
                return Err(format!("cluster {} has too few edges to be connected", c.id));
            }
            if !edge_connected(c) {
                return Err(format!("cluster {} is not edge-connected", c.id));
            }
        }
        if total != self.total_particles {
            return Err(format!("conservation broken: {total} != {}", self.total_particles));
        }
        if self
            .occupancy
            .iter()
            .enumerate()
            .any(|(s, &o)| o != NONE && !seen[s])
        {
            return Err("occupied site outside every cluster".into());
        }
        if self.clusters().count() != self.n_clusters {
            return Err("cluster count drifted".into());
        }
        Ok(())
    }

    /// `(coords, cluster id)` for every occupied site.
    pub fn snapshot(&self) -> Snapshot {
        let rows = self
            .occupancy
            .iter()
            .enumerate()
            .filter(|(_, &o)| o != NONE)
            .map(|(s, &o)| (self.coords(s), o))
            .collect();
        Snapshot {
            t: self.now,
            d: self.d,
            rows,
        }
    }

    /// Cluster size -> number of clusters of that size.
    pub fn size_histogram(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for c in self.clusters() {
            *h.entry(c.size()).or_insert(0) += 1;
        }
        h
    }
}

fn edge_connected(c: &ClusterD) -> bool {
    if c.sites.len() <= 1 {
        return true;
    }
    let index: std::collections::HashMap<usize, usize> =
        c.sites.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let mut adj = vec![Vec::new(); c.sites.len()];
    for &(u, v) in &c.internal_edges {
        match (index.get(&u), index.get(&v)) {
            (Some(&i), Some(&j)) => {
                adj[i].push(j);
                adj[j].push(i);
            }
            _ => return false,
        }
    }
    let mut seen = vec![false; c.sites.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub d: usize,
    pub rows: Vec<(Vec<usize>, u32)>,
}

impl Snapshot {
    /// Header `x1,..,xd,cluster_id`, one row per occupied site.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let header: Vec<String> = (1..=self.d).map(|i| format!("x{i}")).collect();
        writeln!(w, "{},cluster_id", header.join(","))?;
        for (coords, id) in &self.rows {
            for c in coords {
                write!(w, "{c},")?;
            }
            writeln!(w, "{id}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunDReport {
    pub series: ObservationSeries,
    /// Size histogram at each observation time.
    pub histograms: Vec<BTreeMap<usize, usize>>,
    pub snapshots: Vec<Snapshot>,
    pub events: u64,
}

pub fn run_d<R: Rng + ?Sized>(config: &ConfigD, rng: &mut R) -> EngineResult<RunDReport> {
    let world = WorldD::init(config, rng)?;
    run_world_d(world, config, rng)
}

pub fn run_world_d<R: Rng + ?Sized>(
    mut world: WorldD,
    config: &ConfigD,
    rng: &mut R,
) -> EngineResult<RunDReport> {
    let guard = config.guard_fraction * world.occupancy.len() as f64;
    let obs = &config.obs_times;
    let mut report = RunDReport {
        series: ObservationSeries::with_capacity(obs.len()),
        histograms: Vec::with_capacity(obs.len()),
        snapshots: Vec::new(),
        events: 0,
    };
    report.series.saturated = world.saturated;
    report.series.contaminated = !world.saturated && world.max_size as f64 > guard;
    let mut k = 0;
    let record = |world: &WorldD, report: &mut RunDReport, t: f64| {
        report
            .series
            .push(t, world.tagged_size(), world.n_clusters, world.max_size);
        report.histograms.push(world.size_histogram());
        if config.snapshots {
            let mut snap = world.snapshot();
            snap.t = t;
            report.snapshots.push(snap);
        }
    };
    while !report.series.contaminated {
        let Some(next_t) = world.next_event_time() else {
            break;
        };
        if next_t > config.t_max || world.n_clusters <= 1 {
            break;
        }
        while k < obs.len() && obs[k] < next_t {
            record(&world, &mut report, obs[k]);
            k += 1;
        }
        if world.step(rng)?.is_some() {
            report.events += 1;
            if world.max_size as f64 > guard {
                report.series.contaminated = true;
            }
        }
    }
    while k < obs.len() {
        record(&world, &mut report, obs[k]);
        k += 1;
    }
    Ok(report)
}
