//! Problem files, a reference oracle for `P_F(x0)`, threaded execution and
//! run/compare plumbing on top of `csep-core`.

pub mod error;
pub mod exec;
pub mod oracle;
pub mod problem_file;
pub mod runner;

pub use error::{HarnessError, Result};
pub use exec::Threaded;
pub use oracle::{brute_force_solution, natural_residual, reference_solution};
pub use problem_file::{load_problem, parse_problem, Problem};
pub use runner::{compare, run, Algorithm, ComparisonReport, RunReport, RunSpec, Summary};
