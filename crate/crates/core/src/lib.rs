//! Multi-point integrated sensing and communication.
//!
//! A set of dual-functional radars (DFRs) either sense a shared target or
//! jointly beamform to one downlink receiver. This crate models the
//! channels, builds zero-forcing beams, scores fused detection accuracy by
//! hard voting, allocates power, and searches over functionality
//! selections to trade detection accuracy against data rate.
//!
//! ```
//! use mpisac::optimizer::{hmo_solve, HmoConfig, Problem};
//! use mpisac::scenario::default_scenario;
//!
//! let problem = Problem::new(default_scenario(), 0).unwrap();
//! let sol = hmo_solve(&problem, &HmoConfig::default().with_mu(0.01)).unwrap();
//! assert!(sol.accuracy >= 0.5);
//! ```

pub mod beamform;
pub mod channel;
pub mod experiments;
pub mod fusion;
pub mod metrics;
pub mod optimizer;
pub mod power;
pub mod scenario;

use thiserror::Error;

/// Any error this crate can produce.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Scenario(#[from] scenario::ScenarioError),
    #[error(transparent)]
    Channel(#[from] channel::ChannelError),
    #[error(transparent)]
    Beamform(#[from] beamform::BeamformError),
    #[error(transparent)]
    Fusion(#[from] fusion::FusionError),
    #[error(transparent)]
    Power(#[from] power::PowerError),
    #[error(transparent)]
    Optimizer(#[from] optimizer::OptimizerError),
    #[error(transparent)]
    Experiment(#[from] experiments::ExperimentError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
