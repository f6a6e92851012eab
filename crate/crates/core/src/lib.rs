//! Ray-bundle simulator for de Broglie-Schroedinger trajectories.
//!
//! A monochromatic wave launched from the z = 0 front is discretized into an
//! ordered bundle of rays. Each ray obeys Hamiltonian equations in which the
//! wave potential W = -(hbar^2 / 2m) R''/R couples it to its neighbors through
//! the amplitude R, itself carried by flux conservation along the ray tubes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bundle;
pub mod dynamics;
pub mod error;
pub mod oracle;
pub mod potentials;
pub mod scenario;
pub mod validation;
pub mod vec2;
pub mod wavefield;

pub use bundle::{launch_bundle, Bundle, CausticEvent, Ray, RaySample, Sample, TrajectoryRecord};
pub use dynamics::{hamiltonian, run, Propagator, RunOutcome, StepReport};
pub use error::{Error, Result};
pub use potentials::{PotentialField, PotentialKind, PotentialSpec};
pub use scenario::{load_scenario, validate_scenario, Mode, Scenario, ValidatedScenario};
pub use vec2::Vec2;
