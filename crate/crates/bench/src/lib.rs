//! Scenario runner and report writer for comparing the Lanczos and the
//! warm-started block Lanczos backends inside robust PCA and matrix
//! completion solvers.

pub mod checks;
pub mod config;
pub mod error;
pub mod report;
pub mod scenario;

pub use config::{Backend, Format, Problem, ScenarioConfig};
pub use error::{BenchError, Result};
pub use report::{emit_table, parse_csv, ReportRow};
pub use scenario::{run_all, run_scenario, Outcome};
