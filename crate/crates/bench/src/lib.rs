//! Benchmark harness for the Relaxed Elastic Net: an estimator registry,
//! outer-fold evaluation across datasets and seeds, pooled-SE reports and
//! the `renet` command line.

pub mod bench;
pub mod cli;
pub mod estimator;
pub mod report;

pub use bench::{run_benchmark, BenchOutcome, BenchRow, Source};
pub use estimator::{Estimator, FitContext, ModelFit, Registry};
pub use report::{aggregate_report, Metric, Report};
