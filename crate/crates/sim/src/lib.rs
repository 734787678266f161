//! Synthetic worlds, seeded conservatism trials, report emission and the
//! `setslam` command line.

pub mod cli;
pub mod report;
pub mod slamsim;
pub mod trials;
pub mod world;

use setslam_core::conformal::ConformalError;
use setslam_core::error::{PolytopeError, UqError};
use setslam_core::slam::SlamError;
use thiserror::Error;

pub use cli::run_cli;
pub use report::{emit_report, emit_slam};
pub use slamsim::{run_slam_sim, SlamSimConfig};
pub use trials::{conservatism_test, Primitive, Report, TrialConfig};
pub use world::{gen_world, World, WorldConfig};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("sampling failed: {0}")]
    Sampling(String),
    #[error(transparent)]
    Uq(#[from] UqError),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    #[error(transparent)]
    Slam(#[from] SlamError),
    #[error(transparent)]
    Conformal(#[from] ConformalError),
}

impl SimError {
    /// Errors caused by the inputs rather than the computation.
    pub fn is_validation(&self) -> bool {
        match self {
            SimError::Config(_) => true,
            SimError::Uq(UqError::Invalid(_) | UqError::Polytope(PolytopeError::Invalid(_))) => true,
            SimError::Polytope(PolytopeError::Invalid(_) | PolytopeError::UnsupportedTemplate(_)) => true,
            SimError::Slam(SlamError::Invalid(_)) => true,
            SimError::Conformal(ConformalError::BadDelta(_) | ConformalError::Parse { .. } | ConformalError::NoScores) => true,
            _ => false,
        }
    }
}
