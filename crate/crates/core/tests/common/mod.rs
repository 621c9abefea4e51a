//! Invariant checks shared by the property tests and the acceptance run.

#![allow(dead_code)]

use cca_core::ensemble::{run_ensemble, BaseConfig, EnsembleConfig};
use cca_core::lattice1d::{self, Config1D, World1D};
use cca_core::latticed::{ConfigD, WorldD};
use cca_core::{rng_from_seed, EngineError, SimRng};

/// A small randomized one-dimensional configuration.
#[derive(Debug, Clone)]
pub struct SmallCase {
    pub alpha: f64,
    pub p: f64,
    pub length: usize,
    pub seed: u64,
    pub steps: usize,
}

impl SmallCase {
    pub fn config(&self) -> Config1D {
        let mut c = Config1D::new(self.alpha, self.p, self.length, 50.0);
        c.obs_times = vec![0.0, 1.0, 5.0, 50.0];
        c.seed = self.seed;
        c.guard_fraction = 1.0;
        c
    }
}

pub mod strategy {
    use super::SmallCase;
    use proptest::prelude::*;

    pub fn small_case() -> impl Strategy<Value = SmallCase> {
        (-3.0f64..2.0, 0.02f64..=1.0, 2usize..=256, any::<u64>(), 1usize..400).prop_map(
            |(alpha, p, length, seed, steps)| SmallCase {
                alpha,
                p,
                length,
                seed,
                steps,
            },
        )
    }
}

type State = (Vec<(u32, u32, usize, usize)>, usize, u32, u64, usize);

fn state(w: &World1D) -> State {
    (
        w.clusters().map(|c| (c.id, c.gen, c.left, c.size)).collect(),
        w.n_clusters(),
        w.tagged_id(),
        w.now().to_bits(),
        w.pending_events(),
    )
}

/// Steps a world event by event, checking after each event:
/// positive gaps and a consistent ring (via `check_invariants`), particle
/// conservation, and that stale events neither change the world nor draw
/// randomness.
pub fn check_engine_invariants(case: &SmallCase) -> Result<(), String> {
    let config = case.config();
    let mut rng = rng_from_seed(case.seed);
    let mut world = match World1D::init(&config, &mut rng) {
        Ok(w) => w,
        Err(EngineError::EmptyWorld) => return Ok(()),
        Err(e) => return Err(e.to_string()),
    };
    let particles = world.occupancy().iter().filter(|&&o| o).count();
    world.check_invariants()?;
    for _ in 0..case.steps {
        if world.next_event_time().is_none() {
            break;
        }
        let before = state(&world);
        let rng_before: SimRng = rng.clone();
        let report = world.step(&mut rng).map_err(|e| e.to_string())?;
        if report.is_stale() {
            // One queue entry fewer, nothing else.
            let after = state(&world);
            if (before.0.as_slice(), before.1, before.2, before.3)
                != (after.0.as_slice(), after.1, after.2, after.3)
                || after.4 + 1 != before.4
            {
                return Err("stale event changed the world".into());
            }
            if rng != rng_before {
                return Err("stale event consumed randomness".into());
            }
        }
        world.check_invariants()?;
        let now = world.occupancy().iter().filter(|&&o| o).count();
        if now != particles {
            return Err(format!("particle count {now} != {particles}"));
        }
    }
    Ok(())
}

/// Two runs from the same seed agree exactly.
pub fn check_determinism(case: &SmallCase) -> Result<(), String> {
    let config = case.config();
    let a = lattice1d::run(&config, &mut rng_from_seed(case.seed));
    let b = lattice1d::run(&config, &mut rng_from_seed(case.seed));
    match (a, b) {
        (Ok(a), Ok(b)) => {
            if a.series != b.series || a.events != b.events || a.final_time != b.final_time {
                return Err("replays diverged".into());
            }
            Ok(())
        }
        (Err(a), Err(b)) if a == b => Ok(()),
        _ => Err("replays disagree on success".into()),
    }
}

/// An ensemble gives identical results and CSV bytes on 1 and 3 threads.
pub fn check_parallelism_invariance(case: &SmallCase) -> Result<(), String> {
    let mut config = case.config();
    config.length = config.length.min(96);
    let mut serial = EnsembleConfig::new(BaseConfig::OneD(config), 5, case.seed);
    serial.parallelism = 1;
    let mut parallel = serial.clone();
    parallel.parallelism = 3;
    let a = run_ensemble(&serial).map_err(|e| e.to_string())?;
    let b = run_ensemble(&parallel).map_err(|e| e.to_string())?;
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    a.write_csv(&mut ca).map_err(|e| e.to_string())?;
    b.write_csv(&mut cb).map_err(|e| e.to_string())?;
    if a != b || ca != cb {
        return Err("results depend on the thread count".into());
    }
    Ok(())
}

/// The d-dimensional engine keeps its occupancy map, site sets and open
/// edges consistent.
pub fn check_engine_d_invariants(d: usize, length: usize, p: f64, alpha: f64, seed: u64, steps: usize) -> Result<(), String> {
    let mut config = ConfigD::new(d, alpha, p, length, 10.0);
    config.obs_times.clear();
    let mut rng = rng_from_seed(seed);
    let mut world = match WorldD::init(&config, &mut rng) {
        Ok(w) => w,
        Err(EngineError::EmptyWorld) => return Ok(()),
        Err(e) => return Err(e.to_string()),
    };
    world.check_invariants()?;
    for _ in 0..steps {
        if world.next_event_time().is_none() {
            break;
        }
        world.step(&mut rng).map_err(|e| e.to_string())?;
        world.check_invariants()?;
    }
    Ok(())
}
