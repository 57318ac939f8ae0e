//! Simulation and exact analysis of the one-dimensional abelian sandpile.
//!
//! Configurations take heights in `{1, 2}`; a site of height 2 is critical
//! and adding a grain there starts an avalanche. The crate provides
//!
//! - [`config`]: configurations, critical sets, interval decompositions;
//! - [`toppling`]: the toppling maps, finite-volume relaxation, stabilization;
//! - [`sim`]: Markov chain simulators, monotone couplings and estimators;
//! - [`exact`]: exact generator, stationary and transient laws for small volumes;
//! - [`series`]: the generator applied to local observables and its Taylor series;
//! - [`experiments`]: seeded, reproducible scenario runs with JSON/CSV output.

pub mod config;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod series;
pub mod sim;
pub mod toppling;

pub use config::{
    decency_report, interval_decomposition, CriticalSet, DecencyReport, HeightConfig, IntervalDecomposition, Tail,
};
pub use error::{Result, SandpileError};
pub use toppling::{
    apply_topple, k_minus, k_plus, phi, stabilize, stabilize_bruteforce, stabilize_pile, topple_add, topple_add_finite,
    ExtNat, FiniteVolumePile, GrainField, SiteOrInfinity, ToppleCase, Toppling, TopplingOutcome,
};
