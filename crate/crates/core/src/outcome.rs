//! Run options, per-iteration records and run outcomes shared by all solvers.

use alloc::vec::Vec;
use core::fmt;

use crate::linalg::Point;

/// Slack allowed on the per-iteration inequalities checked against a known solution.
pub const INEQUALITY_SLACK: f64 = 1e-8;
/// Slack allowed on the monotone growth of `|x_n - x0|`.
pub const MONOTONE_SLACK: f64 = 1e-12;
/// Tolerance on `x_n == P_{Q_n}(x0)`.
pub const Q_PROJECTION_TOL: f64 = 1e-10;
/// Lower bound accepted for a prox optimality certificate.
pub const CERTIFICATE_SLACK: f64 = 1e-6;

/// Optional instrumentation for a run.
#[derive(Clone, Copy, Default)]
pub struct RunOptions<'a> {
    /// `P_F(x0)`, used for the distance column of the trace.
    pub reference: Option<&'a Point>,
    /// Points of `F` against which the per-iteration inequalities are checked.
    pub known_points: &'a [Point],
    /// Random probes per prox certificate; zero disables certification.
    pub certify_probes: usize,
    pub seed: u64,
    /// Keep `x_{n+1}` of every iteration in the outcome.
    pub record_iterates: bool,
    /// Milliseconds since an arbitrary origin.
    pub clock: Option<&'a (dyn Fn() -> f64 + Sync)>,
}

impl RunOptions<'_> {
    pub(crate) fn now_ms(&self) -> f64 {
        self.clock.map_or(0.0, |c| c())
    }
}

impl fmt::Debug for RunOptions<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RunOptions")
            .field("reference", &self.reference)
            .field("known_points", &self.known_points.len())
            .field("certify_probes", &self.certify_probes)
            .field("seed", &self.seed)
            .field("record_iterates", &self.record_iterates)
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub n: usize,
    /// `|x_{n+1} - x_n|`
    pub step_norm: f64,
    /// `max_i |y^i_{n+1} - x_n|`
    pub residual: f64,
    /// One correction term per constructed `C`-cut.
    pub eps: Vec<f64>,
    pub dist_to_known: Option<f64>,
    /// Degeneracy of each `C`-cut followed by `Q_n`.
    pub degenerate_cuts: Vec<bool>,
    pub wall_ms: f64,
}

impl IterationRecord {
    pub fn eps_min(&self) -> f64 {
        self.eps.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn eps_max(&self) -> f64 {
        self.eps.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Tolerance,
    MaxOuter,
    Error,
}

/// Counts of failed per-iteration checks; all zero on a healthy run.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct InvariantCounters {
    /// `|y_{n+1} - x*|^2 <= |x_n - x*|^2 + eps_n` failures.
    pub fejer: usize,
    /// Known solutions outside a constructed cut.
    pub containment: usize,
    /// Decreases of `|x_n - x0|`.
    pub monotone_distance: usize,
    /// Iterates differing from `P_{Q_n}(x0)`.
    pub q_projection: usize,
    /// Prox certificates below the accepted slack.
    pub prox_certificate: usize,
    /// Prox solves that stopped at their iteration cap.
    pub prox_unconverged: usize,
    pub worst_fejer_slack: f64,
    pub worst_containment_slack: f64,
    pub worst_certificate: f64,
    /// Number of individual checks performed.
    pub checks: usize,
}

impl InvariantCounters {
    pub(crate) fn new() -> Self {
        InvariantCounters {
            worst_fejer_slack: f64::INFINITY,
            worst_containment_slack: f64::INFINITY,
            worst_certificate: f64::INFINITY,
            ..Default::default()
        }
    }

    pub fn total(&self) -> usize {
        self.fejer
            + self.containment
            + self.monotone_distance
            + self.q_projection
            + self.prox_certificate
            + self.prox_unconverged
    }

    pub(crate) fn fejer_check(&mut self, slack: f64) {
        self.checks += 1;
        self.worst_fejer_slack = self.worst_fejer_slack.min(slack);
        if slack < -INEQUALITY_SLACK {
            self.fejer += 1;
        }
    }

    pub(crate) fn containment_check(&mut self, slack: f64) {
        self.checks += 1;
        self.worst_containment_slack = self.worst_containment_slack.min(slack);
        if slack < -INEQUALITY_SLACK {
            self.containment += 1;
        }
    }

    pub(crate) fn certificate_check(&mut self, gap: f64) {
        self.checks += 1;
        self.worst_certificate = self.worst_certificate.min(gap);
        if gap < -CERTIFICATE_SLACK {
            self.prox_certificate += 1;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOutcome {
    pub final_x: Point,
    pub stop_reason: StopReason,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
    pub invariant_violations: InvariantCounters,
    pub prox_solves: usize,
    /// Projections onto the feasible set, including those inside prox solves.
    pub set_projections: usize,
    /// `x_{n+1}` per iteration when requested.
    pub iterates: Vec<Point>,
}

impl SolverOutcome {
    /// Running sums of `|x_{n+1} - x_n|^2`.
    pub fn step_square_partial_sums(&self) -> Vec<f64> {
        self.trace
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r.step_norm * r.step_norm;
                Some(*acc)
            })
            .collect()
    }
}
