//! Exact event-driven simulation of cluster-cluster aggregation on a ring
//! (a one-dimensional torus) of `length` sites.
//!
//! Every cluster is an interval of occupied sites carrying an exponential
//! clock of rate `size^-alpha` (optionally capped). When a clock rings the
//! cluster steps one site left or right with probability 1/2; if that closes
//! the gap to its neighbour the two intervals merge on the spot. Pending
//! clocks are invalidated lazily: a merged cluster receives a fresh id, so
//! events addressed to the old ids are discarded when popped.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::{self, Write};

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{EngineError, EngineResult};

/// Smallest clock advance treated as progress. Below this the replica is
/// stopped and reported as numerically coalesced.
pub const STALL_THRESHOLD: f64 = 1e-15;

/// Which time-zero particle is followed as "the tagged particle".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TagRule {
    /// The occupied site closest to site 0; a tie between `-k` and `+k`
    /// resolves to `+k`.
    #[default]
    NearestOrigin,
    /// The first occupied site at or to the right of site 0. The gaps to its
    /// right are i.i.d. geometric, which is the convention of the
    /// difference-walk oracle.
    FirstAtOrRight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config1D {
    pub alpha: f64,
    pub p: f64,
    /// Torus circumference in sites.
    #[serde(rename = "L")]
    pub length: usize,
    pub t_max: f64,
    #[serde(default)]
    pub obs_times: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_guard_fraction")]
    pub guard_fraction: f64,
    #[serde(default)]
    pub rate_cap: Option<f64>,
    #[serde(default)]
    pub log_tagged_steps: bool,
    #[serde(default)]
    pub tag_rule: TagRule,
}

pub(crate) fn default_guard_fraction() -> f64 {
    0.25
}

impl Config1D {
    pub fn new(alpha: f64, p: f64, length: usize, t_max: f64) -> Self {
        Config1D {
            alpha,
            p,
            length,
            t_max,
            obs_times: vec![t_max],
            seed: 0,
            guard_fraction: default_guard_fraction(),
            rate_cap: None,
            log_tagged_steps: false,
            tag_rule: TagRule::default(),
        }
    }

    pub fn validate(&self) -> EngineResult<()> {
        validate_common(
            self.alpha,
            self.p,
            self.t_max,
            &self.obs_times,
            self.rate_cap,
        )?;
        if self.length < 2 {
            return Err(EngineError::InvalidConfig("L must be at least 2".into()));
        }
        if self.length > u32::MAX as usize / 2 {
            return Err(EngineError::InvalidConfig("L is too large".into()));
        }
        if !(self.guard_fraction > 0.0 && self.guard_fraction <= 1.0) {
            return Err(EngineError::InvalidConfig(
                "guard fraction must lie in (0,1]".into(),
            ));
        }
        Ok(())
    }
}

pub(crate) fn validate_common(
    alpha: f64,
    p: f64,
    t_max: f64,
    obs_times: &[f64],
    rate_cap: Option<f64>,
) -> EngineResult<()> {
    let bad = |m: &str| Err(EngineError::InvalidConfig(m.to_string()));
    if !alpha.is_finite() {
        return bad("alpha must be finite");
    }
    if !(p > 0.0 && p <= 1.0) {
        return bad("p must lie in (0,1]");
    }
    if !(t_max >= 0.0) || t_max.is_infinite() && !obs_times.is_empty() {
        return bad("t-max must be a nonnegative real");
    }
    if obs_times.iter().any(|t| !(*t >= 0.0)) {
        return bad("observation times must be nonnegative");
    }
    if obs_times.windows(2).any(|w| w[0] > w[1]) {
        return bad("observation times must be sorted ascending");
    }
    if obs_times.last().is_some_and(|&t| t > t_max) {
        return bad("observation times must not exceed t-max");
    }
    if let Some(m) = rate_cap {
        if !(m > 0.0) {
            return bad("rate cap must be positive");
        }
    }
    Ok(())
}

/// Clock rate of a cluster holding `size` particles.
#[inline]
pub fn cluster_rate(size: usize, alpha: f64, rate_cap: Option<f64>) -> f64 {
    let r = if alpha == 0.0 {
        1.0
    } else {
        (size as f64).powf(-alpha)
    };
    match rate_cap {
        Some(m) => r.min(m),
        None => r,
    }
}

/// An occupied interval `[left, left + size)` (mod L).
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster1D {
    pub id: u32,
    pub gen: u32,
    pub left: usize,
    pub size: usize,
    pub rate: f64,
    /// Ring index (time-zero ordering) of the leftmost particle.
    pub first_particle: usize,
    prev: u32,
    next: u32,
    alive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub cluster_id: u32,
    pub gen: u32,
}

impl Eq for Event {}

impl Ord for Event {
    // Reversed so that `BinaryHeap` pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .t
            .total_cmp(&self.t)
            .then_with(|| other.cluster_id.cmp(&self.cluster_id))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    /// The tagged cluster's own clock rang.
    Move,
    /// Another cluster stepped into the tagged one.
    Merge,
}

impl StepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::Move => "move",
            StepKind::Merge => "merge",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaggedStep {
    pub t: f64,
    pub size_before: usize,
    pub size_after: usize,
    pub kind: StepKind,
}

/// Every event that touched the tagged cluster, in time order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaggedClusterLog {
    /// Size of the tagged cluster at time zero.
    pub initial_size: usize,
    pub entries: Vec<TaggedStep>,
}

impl TaggedClusterLog {
    pub fn new(initial_size: usize) -> Self {
        TaggedClusterLog {
            initial_size,
            entries: Vec::new(),
        }
    }

    pub fn moves(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.kind == StepKind::Move)
            .count()
    }

    /// Writes `step_index,time,size_before,size_after,kind` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "step_index,time,size_before,size_after,kind")?;
        for (i, e) in self.entries.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{}",
                i,
                e.t,
                e.size_before,
                e.size_after,
                e.kind.as_str()
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSeries {
    pub times: Vec<f64>,
    pub c0_size: Vec<usize>,
    pub n_clusters: Vec<usize>,
    pub max_size: Vec<usize>,
    /// The guard tripped; observations after the trip repeat the state at
    /// that moment.
    pub contaminated: bool,
    /// A single cluster covered the whole torus at time zero.
    pub saturated: bool,
}

impl ObservationSeries {
    pub fn with_capacity(n: usize) -> Self {
        ObservationSeries {
            times: Vec::with_capacity(n),
            c0_size: Vec::with_capacity(n),
            n_clusters: Vec::with_capacity(n),
            max_size: Vec::with_capacity(n),
            contaminated: false,
            saturated: false,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub(crate) fn push(&mut self, t: f64, c0: usize, n: usize, max: usize) {
        self.times.push(t);
        self.c0_size.push(c0);
        self.n_clusters.push(n);
        self.max_size.push(max);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub time: f64,
    /// `None` when the popped event was stale.
    pub moved: Option<u32>,
    /// `+1` or `-1` for a live step, `0` for a stale event.
    pub direction: i8,
    /// Id of the cluster created by a merge during this step.
    pub merged_into: Option<u32>,
    /// Clock advance caused by this step.
    pub advance: f64,
}

impl StepReport {
    pub fn is_stale(&self) -> bool {
        self.moved.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct World1D {
    length: usize,
    alpha: f64,
    rate_cap: Option<f64>,
    clusters: Vec<Cluster1D>,
    queue: BinaryHeap<Event>,
    now: f64,
    head: u32,
    tagged_id: u32,
    tagged_particle: usize,
    total_particles: usize,
    n_clusters: usize,
    max_size: usize,
    saturated: bool,
    log: Option<TaggedClusterLog>,
}

const NONE: u32 = u32::MAX;

impl World1D {
    /// Samples a Bernoulli(p) occupancy and builds the initial clusters.
    pub fn init<R: Rng + ?Sized>(config: &Config1D, rng: &mut R) -> EngineResult<Self> {
        config.validate()?;
        let occupancy: Vec<bool> = (0..config.length)
            .map(|_| config.p >= 1.0 || rng.random_bool(config.p))
            .collect();
        Self::from_occupancy(config, &occupancy, rng)
    }

    /// Builds a world from an explicit occupancy vector; clocks are drawn
    /// from `rng` in cluster-id order.
    pub fn from_occupancy<R: Rng + ?Sized>(
        config: &Config1D,
        occupancy: &[bool],
        rng: &mut R,
    ) -> EngineResult<Self> {
        let length = occupancy.len();
        if length < 2 {
            return Err(EngineError::InvalidConfig("L must be at least 2".into()));
        }
        let total_particles = occupancy.iter().filter(|&&o| o).count();
        if total_particles == 0 {
            return Err(EngineError::EmptyWorld);
        }
        let tagged_site = tagged_site(occupancy, config.tag_rule).expect("nonempty occupancy");
        let tagged_particle = occupancy[..tagged_site].iter().filter(|&&o| o).count();

        let mut world = World1D {
            length,
            alpha: config.alpha,
            rate_cap: config.rate_cap,
            clusters: Vec::with_capacity(2 * (total_particles.min(length / 2 + 1))),
            queue: BinaryHeap::new(),
            now: 0.0,
            head: 0,
            tagged_id: 0,
            tagged_particle,
            total_particles,
            n_clusters: 0,
            max_size: 0,
            saturated: false,
            log: None,
        };

        if total_particles == length {
            world.saturated = true;
            world.push_cluster(0, length, 0);
            world.link(0, 0);
            world.max_size = length;
        } else {
            let start = occupancy.iter().position(|&o| !o).expect("an empty site");
            let mut particle_index = occupancy[..start].iter().filter(|&&o| o).count();
            let mut i = 1;
            while i <= length {
                let site = (start + i) % length;
                if occupancy[site] {
                    let mut size = 0;
                    while occupancy[(site + size) % length] {
                        size += 1;
                    }
                    let first = particle_index % total_particles;
                    let id = world.push_cluster(site, size, first);
                    let offset = (tagged_particle + total_particles - first) % total_particles;
                    if offset < size {
                        world.tagged_id = id;
                    }
                    particle_index += size;
                    i += size;
                } else {
                    i += 1;
                }
            }
            let n = world.clusters.len() as u32;
            for id in 0..n {
                world.link(id, (id + 1) % n);
            }
            world.max_size = world.clusters.iter().map(|c| c.size).max().unwrap_or(0);
            for id in 0..n {
                world.schedule(id, rng);
            }
        }
        if config.log_tagged_steps {
            world.log = Some(TaggedClusterLog::new(world.tagged_size()));
        }
        Ok(world)
    }

    fn push_cluster(&mut self, left: usize, size: usize, first_particle: usize) -> u32 {
        let id = self.clusters.len() as u32;
        self.clusters.push(Cluster1D {
            id,
            gen: 0,
            left,
            size,
            rate: cluster_rate(size, self.alpha, self.rate_cap),
            first_particle,
            prev: NONE,
            next: NONE,
            alive: true,
        });
        self.n_clusters += 1;
        id
    }

    fn link(&mut self, left: u32, right: u32) {
        self.clusters[left as usize].next = right;
        self.clusters[right as usize].prev = left;
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

    pub fn length(&self) -> usize {
        self.length
    }

    /// Current site map, `true` where a particle sits.
    pub fn occupancy(&self) -> Vec<bool> {
        let mut occ = vec![false; self.length];
        for c in self.clusters() {
            for k in 0..c.size {
                occ[(c.left + k) % self.length] = true;
            }
        }
        occ
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn total_particles(&self) -> usize {
        self.total_particles
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }

    pub fn is_saturated(&self) -> bool {
        self.saturated
    }

    pub fn tagged_id(&self) -> u32 {
        self.tagged_id
    }

    /// Ring index of the tagged particle among all time-zero particles.
    pub fn tagged_particle(&self) -> usize {
        self.tagged_particle
    }

    /// Size of the cluster holding the tagged particle.
    pub fn tagged_size(&self) -> usize {
        self.clusters[self.tagged_id as usize].size
    }

    /// Whether the tagged particle and the `m`-th particle to its right
    /// belong to the same cluster.
    pub fn tagged_connected_right(&self, m: usize) -> bool {
        let c = &self.clusters[self.tagged_id as usize];
        let offset = (self.tagged_particle + self.total_particles - c.first_particle)
            % self.total_particles;
        offset + m < c.size
    }

    pub fn cluster(&self, id: u32) -> Option<&Cluster1D> {
        self.clusters.get(id as usize).filter(|c| c.alive)
    }

    /// Live clusters in ring order, left to right.
    pub fn clusters(&self) -> impl Iterator<Item = &Cluster1D> + '_ {
        let mut cur = self.head;
        let mut remaining = self.n_clusters;
        std::iter::from_fn(move || {
            if remaining == 0 {
                return None;
            }
            remaining -= 1;
            let c = &self.clusters[cur as usize];
            cur = c.next;
            Some(c)
        })
    }

    pub fn take_log(&mut self) -> Option<TaggedClusterLog> {
        self.log.take()
    }

    pub fn log(&self) -> Option<&TaggedClusterLog> {
        self.log.as_ref()
    }

    pub fn next_event_time(&self) -> Option<f64> {
        self.queue.peek().map(|e| e.t)
    }

    pub fn pending_events(&self) -> usize {
        self.queue.len()
    }

    /// Inserts an event directly; used to exercise the stale-event contract.
    pub fn push_event(&mut self, event: Event) {
        self.queue.push(event);
    }

    /// Number of empty sites between `a` and the next cluster clockwise.
    fn gap_right(&self, a: &Cluster1D) -> usize {
        let b = &self.clusters[a.next as usize];
        let end = (a.left + a.size) % self.length;
        (b.left + self.length - end) % self.length
    }

    /// Empty sites between cluster `id` and its right neighbour.
    pub fn gap_after(&self, id: u32) -> EngineResult<usize> {
        let a = self.cluster(id).ok_or(EngineError::UnknownCluster(id))?;
        if a.next == a.id {
            return Ok(self.length - a.size);
        }
        Ok(self.gap_right(a))
    }

    fn is_live(&self, ev: &Event) -> bool {
        self.clusters
            .get(ev.cluster_id as usize)
            .is_some_and(|c| c.alive && c.gen == ev.gen)
    }

    /// Pops the earliest event and applies it.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> EngineResult<StepReport> {
        let ev = self.queue.pop().ok_or(EngineError::QueueEmpty)?;
        if !self.is_live(&ev) {
            return Ok(StepReport {
                time: self.now,
                moved: None,
                direction: 0,
                merged_into: None,
                advance: 0.0,
            });
        }
        let advance = ev.t - self.now;
        self.now = ev.t;
        let id = ev.cluster_id;
        let right: bool = rng.random();
        let size_before = self.clusters[id as usize].size;
        let tagged_before = self.tagged_id;
        let l = self.length;

        let c = &mut self.clusters[id as usize];
        c.left = if right { (c.left + 1) % l } else { (c.left + l - 1) % l };
        let (prev, next) = (c.prev, c.next);
        let merged_into = if next == id {
            None
        } else if right {
            if self.gap_right(&self.clusters[id as usize]) == 0 {
                Some(self.merge_clusters(id, next)?)
            } else {
                None
            }
        } else if self.gap_right(&self.clusters[prev as usize]) == 0 {
            Some(self.merge_clusters(prev, id)?)
        } else {
            None
        };
        let survivor = merged_into.unwrap_or(id);
        self.schedule(survivor, rng);

        if let Some(log) = self.log.as_mut() {
            if tagged_before == id {
                log.entries.push(TaggedStep {
                    t: self.now,
                    size_before,
                    size_after: self.clusters[survivor as usize].size,
                    kind: StepKind::Move,
                });
            } else if merged_into.is_some() && self.tagged_id != tagged_before {
                log.entries.push(TaggedStep {
                    t: self.now,
                    size_before: self.clusters[tagged_before as usize].size,
                    size_after: self.clusters[survivor as usize].size,
                    kind: StepKind::Merge,
                });
            }
        }

        debug_assert!(self.local_gaps_ok(survivor));
        Ok(StepReport {
            time: self.now,
            moved: Some(id),
            direction: if right { 1 } else { -1 },
            merged_into,
            advance,
        })
    }

    /// Applies every event up to and including `t_end`; returns the number
    /// of live steps taken.
    pub fn advance_to<R: Rng + ?Sized>(&mut self, t_end: f64, rng: &mut R) -> EngineResult<u64> {
        let mut steps = 0;
        while self.next_event_time().is_some_and(|t| t <= t_end) {
            if !self.step(rng)?.is_stale() {
                steps += 1;
            }
        }
        Ok(steps)
    }

    fn local_gaps_ok(&self, id: u32) -> bool {
        let c = &self.clusters[id as usize];
        if c.next == id {
            return c.size <= self.length;
        }
        let prev = &self.clusters[c.prev as usize];
        self.gap_right(c) >= 1 && self.gap_right(prev) >= 1
    }

    /// Replaces the ring-adjacent pair `a` (left) and `b` (right), which must
    /// touch, by a single cluster with a fresh id.
    pub fn merge_clusters(&mut self, a: u32, b: u32) -> EngineResult<u32> {
        let ca = self.cluster(a).ok_or(EngineError::UnknownCluster(a))?;
        let cb = self.cluster(b).ok_or(EngineError::UnknownCluster(b))?;
        if a == b || ca.next != b || self.gap_right(ca) != 0 {
            return Err(EngineError::NotAdjacent(a, b));
        }
        let size = ca.size + cb.size;
        let gen = ca.gen.max(cb.gen) + 1;
        let (left, first_particle) = (ca.left, ca.first_particle);
        let (outer_prev, outer_next) = (ca.prev, cb.next);
        let two_ring = ca.prev == b;

        let id = self.clusters.len() as u32;
        self.clusters.push(Cluster1D {
            id,
            gen,
            left,
            size,
            rate: cluster_rate(size, self.alpha, self.rate_cap),
            first_particle,
            prev: NONE,
            next: NONE,
            alive: true,
        });
        self.clusters[a as usize].alive = false;
        self.clusters[b as usize].alive = false;
        self.n_clusters -= 1;
        if two_ring {
            self.link(id, id);
        } else {
            self.link(outer_prev, id);
            self.link(id, outer_next);
        }
        if self.head == a || self.head == b {
            self.head = id;
        }
        if self.tagged_id == a || self.tagged_id == b {
            self.tagged_id = id;
        }
        self.max_size = self.max_size.max(size);
        Ok(id)
    }

    /// Full structural check: ring links, gaps, conservation, queue coverage.
    pub fn check_invariants(&self) -> Result<(), String> {
        let live: Vec<&Cluster1D> = self.clusters.iter().filter(|c| c.alive).collect();
        if live.len() != self.n_clusters {
            return Err(format!(
                "cluster count {} disagrees with {} live records",
                self.n_clusters,
                live.len()
            ));
        }
        let ring: Vec<&Cluster1D> = self.clusters().collect();
        let total: usize = ring.iter().map(|c| c.size).sum();
        if total != self.total_particles {
            return Err(format!(
                "conservation broken: {} != {}",
                total, self.total_particles
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for c in &ring {
            if !c.alive || !seen.insert(c.id) {
                return Err(format!("ring visits cluster {} twice or dead", c.id));
            }
            if self.clusters[c.next as usize].prev != c.id {
                return Err(format!("broken link after cluster {}", c.id));
            }
            let expect = cluster_rate(c.size, self.alpha, self.rate_cap);
            if (c.rate - expect).abs() > 1e-12 * expect {
                return Err(format!("cluster {} has rate {} != {}", c.id, c.rate, expect));
            }
            if ring.len() > 1 && self.gap_right(c) == 0 {
                return Err(format!("cluster {} touches its right neighbour", c.id));
            }
        }
        if ring.len() > 1 {
            let span: usize = ring.iter().map(|c| c.size + self.gap_right(c)).sum();
            if span != self.length {
                return Err(format!("ring spans {} sites, expected {}", span, self.length));
            }
        }
        if !self.clusters[self.tagged_id as usize].alive {
            return Err("tagged cluster is dead".into());
        }
        if !self.saturated {
            let mut live_events = std::collections::HashMap::new();
            for ev in self.queue.iter() {
                if self.is_live(ev) {
                    *live_events.entry(ev.cluster_id).or_insert(0usize) += 1;
                }
            }
            for c in &ring {
                if live_events.get(&c.id) != Some(&1) {
                    return Err(format!("cluster {} lacks exactly one live clock", c.id));
                }
            }
        }
        Ok(())
    }
}

/// Site of the particle followed under `rule`.
pub fn tagged_site(occupancy: &[bool], rule: TagRule) -> Option<usize> {
    let l = occupancy.len();
    match rule {
        TagRule::FirstAtOrRight => occupancy.iter().position(|&o| o),
        TagRule::NearestOrigin => (0..=l / 2).find_map(|k| {
            if occupancy[k % l] {
                Some(k % l)
            } else if k > 0 && occupancy[l - k] {
                Some(l - k)
            } else {
                None
            }
        }),
    }
}

/// Outcome of [`run`].
#[derive(Debug, Clone)]
pub struct RunReport {
    pub series: ObservationSeries,
    pub log: Option<TaggedClusterLog>,
    /// The clock stopped advancing (rates exploded); the run ended early.
    pub stalled: bool,
    pub events: u64,
    pub final_time: f64,
}

/// Runs one replica up to `t_max`, sampling observables at `obs_times`.
pub fn run<R: Rng + ?Sized>(config: &Config1D, rng: &mut R) -> EngineResult<RunReport> {
    let world = World1D::init(config, rng)?;
    run_world(world, config, rng)
}

/// Drives an already initialised world; `config` supplies the horizon,
/// observation times and guard.
pub fn run_world<R: Rng + ?Sized>(
    mut world: World1D,
    config: &Config1D,
    rng: &mut R,
) -> EngineResult<RunReport> {
    let guard = config.guard_fraction * config.length as f64;
    let obs = &config.obs_times;
    let mut series = ObservationSeries::with_capacity(obs.len());
    series.saturated = world.saturated;
    series.contaminated = !world.saturated && world.max_size as f64 > guard;
    let mut stalled = false;
    let mut events = 0u64;
    let mut k = 0;

    while !series.contaminated && !stalled {
        // A lone cluster only translates; nothing observable changes.
        if world.n_clusters <= 1 && world.log.is_none() {
            break;
        }
        let Some(next_t) = world.next_event_time() else {
            break;
        };
        if next_t > config.t_max {
            break;
        }
        while k < obs.len() && obs[k] < next_t {
            series.push(obs[k], world.tagged_size(), world.n_clusters, world.max_size);
            k += 1;
        }
        let report = world.step(rng)?;
        if report.is_stale() {
            continue;
        }
        events += 1;
        if report.merged_into.is_some() && world.max_size as f64 > guard {
            series.contaminated = true;
        }
        if report.advance < STALL_THRESHOLD {
            stalled = true;
        }
    }
    while k < obs.len() {
        series.push(obs[k], world.tagged_size(), world.n_clusters, world.max_size);
        k += 1;
    }
    Ok(RunReport {
        series,
        final_time: world.now,
        log: world.take_log(),
        stalled,
        events,
    })
}

/// Size of the tagged cluster; errors on a world without clusters.
pub fn tagged_cluster_size(world: &World1D) -> EngineResult<usize> {
    if world.n_clusters == 0 {
        return Err(EngineError::EmptyWorld);
    }
    Ok(world.tagged_size())
}

/// Outcome of [`run_until_coalesced`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coalescence {
    pub time: f64,
    pub stalled: bool,
    /// False when `t_limit` was reached first.
    pub coalesced: bool,
    pub events: u64,
}

/// Runs until a single cluster remains (or the clock stalls, or `t_limit`).
pub fn run_until_coalesced<R: Rng + ?Sized>(
    config: &Config1D,
    t_limit: f64,
    rng: &mut R,
) -> EngineResult<Coalescence> {
    let mut world = World1D::init(config, rng)?;
    let mut events = 0u64;
    while world.n_clusters > 1 {
        match world.next_event_time() {
            Some(t) if t <= t_limit => {}
            _ => {
                return Ok(Coalescence {
                    time: world.now,
                    stalled: false,
                    coalesced: false,
                    events,
                })
            }
        }
        let report = world.step(rng)?;
        if report.is_stale() {
            continue;
        }
        events += 1;
        if report.advance < STALL_THRESHOLD && world.n_clusters > 1 {
            return Ok(Coalescence {
                time: world.now,
                stalled: true,
                coalesced: true,
                events,
            });
        }
    }
    Ok(Coalescence {
        time: world.now,
        stalled: false,
        coalesced: true,
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn occ(bits: &[u8]) -> Vec<bool> {
        bits.iter().map(|&b| b == 1).collect()
    }

    fn cfg(alpha: f64, length: usize) -> Config1D {
        Config1D::new(alpha, 0.5, length, 10.0)
    }

    fn sites(c: &Cluster1D, l: usize) -> Vec<usize> {
        (0..c.size).map(|i| (c.left + i) % l).collect()
    }

    #[test]
    fn wraparound_runs_coalesce() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = World1D::from_occupancy(&cfg(0.0, 8), &occ(&[1, 0, 1, 1, 0, 0, 1, 1]), &mut rng)
            .unwrap();
        let mut found: Vec<Vec<usize>> = w.clusters().map(|c| sites(c, 8)).collect();
        found.sort();
        assert_eq!(found, vec![vec![2, 3], vec![6, 7, 0]]);
        let tagged = w.cluster(w.tagged_id()).unwrap();
        assert_eq!(sites(tagged, 8), vec![6, 7, 0]);
        assert_eq!(tagged_cluster_size(&w).unwrap(), 3);
        w.check_invariants().unwrap();
    }

    #[test]
    fn full_occupancy_is_saturated() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut config = cfg(0.0, 16);
        config.p = 1.0;
        let w = World1D::init(&config, &mut rng).unwrap();
        assert!(w.is_saturated());
        assert_eq!(w.n_clusters(), 1);
        assert_eq!(w.tagged_size(), 16);
        assert_eq!(w.pending_events(), 0);
    }

    #[test]
    fn empty_occupancy_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = World1D::from_occupancy(&cfg(0.0, 8), &[false; 8], &mut rng).unwrap_err();
        assert_eq!(err, EngineError::EmptyWorld);
    }

    #[test]
    fn nearest_origin_tie_prefers_positive_side() {
        // Sites -2 (=8) and +2 are equidistant.
        let o = occ(&[0, 0, 1, 0, 0, 0, 0, 0, 1, 0]);
        assert_eq!(tagged_site(&o, TagRule::NearestOrigin), Some(2));
        let o = occ(&[0, 0, 0, 1, 0, 0, 0, 0, 1, 0]);
        assert_eq!(tagged_site(&o, TagRule::NearestOrigin), Some(8));
        assert_eq!(tagged_site(&o, TagRule::FirstAtOrRight), Some(3));
    }

    /// Scripted rng: the first draw of each step decides direction.
    fn world_ab(alpha: f64, cap: Option<f64>) -> World1D {
        // A = [0..2], B = [4..5] on a ring of 32.
        let mut o = vec![false; 32];
        for s in [0, 1, 2, 4, 5] {
            o[s] = true;
        }
        let mut config = cfg(alpha, 32);
        config.rate_cap = cap;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        World1D::from_occupancy(&config, &o, &mut rng).unwrap()
    }

    fn step_cluster(w: &mut World1D, id: u32, right: bool) -> StepReport {
        // Make the chosen cluster's clock ring next, then find a seed whose
        // first bool matches the requested direction.
        let gen = w.cluster(id).unwrap().gen;
        w.queue.retain(|e| e.cluster_id != id);
        w.push_event(Event {
            t: w.now() + 1e-9,
            cluster_id: id,
            gen,
        });
        for seed in 0.. {
            let mut probe = ChaCha8Rng::seed_from_u64(seed);
            if probe.random::<bool>() == right {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                return w.step(&mut rng).unwrap();
            }
        }
        unreachable!()
    }

    #[test]
    fn right_step_closing_gap_merges() {
        let mut w = world_ab(0.0, None);
        let a = w.clusters().find(|c| c.left == 0).unwrap().id;
        let rep = step_cluster(&mut w, a, true);
        let merged = rep.merged_into.expect("merge");
        let c = w.cluster(merged).unwrap();
        assert_eq!((c.left, c.size), (1, 5));
        assert_eq!(w.n_clusters(), 1);
        assert_eq!(w.tagged_size(), 5);
        assert_eq!(tagged_cluster_size(&w).unwrap(), 5);
    }

    #[test]
    fn left_step_without_contact_keeps_two_clusters() {
        let mut w = world_ab(0.0, None);
        let a = w.clusters().find(|c| c.left == 0).unwrap().id;
        let rep = step_cluster(&mut w, a, false);
        assert_eq!(rep.merged_into, None);
        assert_eq!(w.n_clusters(), 2);
        assert_eq!(sites(w.cluster(a).unwrap(), 32), vec![31, 0, 1]);
        w.check_invariants().unwrap();
    }

    #[test]
    fn stale_event_is_a_no_op() {
        let mut w = world_ab(0.0, None);
        let a = w.clusters().next().unwrap().id;
        w.clusters[a as usize].gen = 5;
        w.push_event(Event {
            t: 0.0,
            cluster_id: a,
            gen: 3,
        });
        let before: Vec<Cluster1D> = w.clusters().cloned().collect();
        let pending = w.pending_events();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rep = w.step(&mut rng).unwrap();
        assert!(rep.is_stale());
        assert_eq!(w.pending_events(), pending - 1);
        let after: Vec<Cluster1D> = w.clusters().cloned().collect();
        assert_eq!(before, after);
        assert_eq!(w.now(), 0.0);
    }

    #[test]
    fn merge_sums_sizes_and_recomputes_rate() {
        let mut o = vec![false; 16];
        for s in [0, 1, 2, 4, 5] {
            o[s] = true;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut w = World1D::from_occupancy(&cfg(1.0, 16), &o, &mut rng).unwrap();
        let a = w.clusters().find(|c| c.left == 0).unwrap().id;
        let b = w.clusters().find(|c| c.left == 4).unwrap().id;
        assert_eq!(w.merge_clusters(a, b), Err(EngineError::NotAdjacent(a, b)));
        w.clusters[a as usize].left = 1;
        let c = w.merge_clusters(a, b).unwrap();
        let c = w.cluster(c).unwrap();
        assert_eq!(c.size, 5);
        assert!((c.rate - 0.2).abs() < 1e-15);
        assert_eq!(c.gen, 1);
        assert!(w.cluster(a).is_none());
    }

    #[test]
    fn rate_cap_bounds_exploding_rates() {
        assert_eq!(cluster_rate(20, -3.0, None), 8000.0);
        assert_eq!(cluster_rate(20, -3.0, Some(100.0)), 100.0);
        assert_eq!(cluster_rate(5, 1.0, Some(100.0)), 0.2);
    }

    #[test]
    fn tagged_merge_jump_equals_partner_size() {
        let mut w = world_ab(0.0, None);
        w.log = Some(TaggedClusterLog::new(3));
        let b = w.clusters().find(|c| c.left == 4).unwrap().id;
        // B steps left into A, which holds site 0 and is tagged.
        step_cluster(&mut w, b, false);
        let e = *w.log().unwrap().entries.last().unwrap();
        assert_eq!(e.kind, StepKind::Merge);
        assert_eq!((e.size_before, e.size_after), (3, 5));
        assert_eq!(w.tagged_size(), 5);
    }

    #[test]
    fn t_max_zero_reports_initial_state() {
        let mut config = Config1D::new(0.0, 0.5, 64, 0.0);
        config.obs_times = vec![0.0, 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = World1D::init(&config, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let rep = run(&config, &mut rng).unwrap();
        assert_eq!(rep.series.len(), 2);
        assert_eq!(rep.series.c0_size, vec![w.tagged_size(); 2]);
    }

    #[test]
    fn guard_trips_contamination() {
        // Blocks of 24 and 2 one site apart: merging yields 26 > 0.25 * 100.
        let mut o = vec![false; 100];
        for s in (0..24).chain([25, 26]) {
            o[s] = true;
        }
        let mut config = Config1D::new(0.0, 0.5, 100, 1e6);
        config.obs_times = vec![1e6];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = World1D::from_occupancy(&config, &o, &mut rng).unwrap();
        let rep = run_world(w, &config, &mut rng).unwrap();
        assert!(rep.series.contaminated);
        assert_eq!(rep.series.max_size, vec![26]);
        assert!(rep.final_time < 1e6);
    }

    #[test]
    fn validation_messages() {
        let mut c = Config1D::new(0.0, 1.5, 64, 1.0);
        assert_eq!(
            c.validate(),
            Err(EngineError::InvalidConfig("p must lie in (0,1]".into()))
        );
        c.p = 0.5;
        c.obs_times = vec![2.0];
        assert!(c.validate().is_err());
        c.obs_times = vec![0.5, 0.25];
        assert!(c.validate().is_err());
        c.obs_times = vec![];
        c.guard_fraction = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn event_log_csv_columns() {
        let log = TaggedClusterLog {
            initial_size: 1,
            entries: vec![TaggedStep {
                t: 0.5,
                size_before: 1,
                size_after: 3,
                kind: StepKind::Move,
            }],
        };
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "step_index,time,size_before,size_after,kind\n0,0.5,1,3,move\n"
        );
    }
}
