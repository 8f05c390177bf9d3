//! Relaxed Elastic Net: coordinate-descent Elastic Net paths, a two-stage
//! relaxation step, joint (λ, θ) cross-validation and the baselines and
//! data generators used to benchmark them.

pub mod adaptive;
pub mod config;
pub mod cv;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod oracles;
pub mod preprocess;
pub mod relax;
pub mod solver;
pub mod synthetic;

pub use error::{RenetError, Result};
pub use model::{CoefVector, Dataset, FitMetrics, Hyperparams};
pub use solver::SolverConfig;
