//! Simulation and verification toolkit for the lattice cluster-cluster
//! aggregation model.
//!
//! * [`lattice1d`]: exact event-driven engine on the one-dimensional torus.
//! * [`latticed`]: the same dynamics on a `d`-dimensional torus.
//! * [`theory`]: closed-form predictions (limit law, growth exponents).
//! * [`stats`]: estimators and goodness-of-fit machinery.
//! * [`ensemble`]: seeded, parallel replica orchestration and persistence.
//! * [`cli`]: the `cca` command-line front end.

pub mod cli;
pub mod ensemble;
pub mod error;
pub mod lattice1d;
pub mod latticed;
pub mod stats;
pub mod theory;

pub use error::{EngineError, EngineResult};

/// Random stream used throughout: portable and reproducible across platforms.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Seeds a [`SimRng`] from a 64-bit value.
pub fn rng_from_seed(seed: u64) -> SimRng {
    use rand::SeedableRng;
    SimRng::seed_from_u64(seed)
}
