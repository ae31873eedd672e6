//! Hybrid cutting-halfspace solvers for common solutions of equilibrium problems.
//!
//! Given bifunctions `f_1, ..., f_N` on a closed convex set `C`, the solvers
//! look for `x*` in `C` with `f_i(x*, y) >= 0` for every `y` in `C` and every
//! `i`, and converge to the projection of the starting point onto the
//! solution set. Each outer step solves one strongly convex prox program per
//! bifunction and projects onto halfspaces that never involve `C` itself.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command
//! line and threaded execution live in the `csep` crate.

#![cfg_attr(not(test), no_std)]
// `!(a < b)` also rejects NaN, which is the intent at every use.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod baselines;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod hybrid;
pub mod linalg;
pub mod outcome;
pub mod problems;
pub mod prox;
pub mod sampling;

pub use baselines::{
    armijo_linesearch, run_armijo_hybrid, run_hybrid_extragradient, ArmijoParams,
};
pub use error::CoreError;
pub use exec::{Executor, Sequential};
pub use geometry::{
    project, project_halfspace, project_halfspace_intersection, project_two_halfspaces,
    FeasibleSet, HalfspaceCut,
};
pub use hybrid::{
    build_c_cut, build_q_cut, epsilon, run_maxsel_hybrid, run_parallel_hybrid, run_sequential,
    run_single, HybridParams, Rule,
};
pub use linalg::{Matrix, Point};
pub use outcome::{InvariantCounters, IterationRecord, RunOptions, SolverOutcome, StopReason};
pub use problems::{
    default_lipschitz, eval, subgrad2, validate, Bifunction, CsepInstance, KnownSolution,
    LipschitzData, Operator, ValidationReport,
};
pub use prox::{certify_prox, solve_prox, ProxResult};
