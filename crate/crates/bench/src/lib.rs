//! Experiment runner and file formats for the long-domain solver benchmarks:
//! reference solutions, the declarative experiment grid, CSV output and the
//! exponential-sum coefficient cache backing the rank-structured solver.

pub mod cache;
pub mod csvio;
pub mod experiment;
pub mod reference;
pub mod rhs;

pub use cache::ExpsumCache;
pub use experiment::{run_experiment, ExperimentConfig, GridSpec, Method, ResultRow, Runner};
pub use rhs::Case;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] longdomain_core::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("solver error: {0}")]
    Solver(String),
}
