//! Benchmark problems, run configuration, orchestration and output files.

use thiserror::Error;

use crate::diagnostics::LiftDragError;
use crate::fespace::SpaceError;
use crate::mesh::MeshError;
use crate::timestep::StepError;

pub mod config;
pub mod output;
pub mod problems;
pub mod run;

pub use config::{preset, RunConfig, PRESETS};
pub use problems::{build_problem, LatticeBoundary, LatticeVortex, Problem, ProblemSpec};
pub use run::{run, RunOutcome};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    LiftDrag(#[from] LiftDragError),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv error: {0}")]
    Csv(String),
}

impl BenchError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        BenchError::Io { path: path.display().to_string(), source }
    }
}
