//! Dispatch of a run specification to the solvers, plus trace and summary output.

use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use csep_core::baselines::extragradient_lambda_bound;
use csep_core::hybrid::max_constants;
use csep_core::{
    run_armijo_hybrid, run_hybrid_extragradient, run_maxsel_hybrid, run_parallel_hybrid,
    run_sequential, run_single, ArmijoParams, HybridParams, InvariantCounters, Point, Rule,
    RunOptions, SolverOutcome, StopReason,
};
use serde::Serialize;

use crate::error::{HarnessError, Result};
use crate::exec::Threaded;
use crate::oracle::reference_solution;
use crate::problem_file::Problem;

pub const TRACE_HEADER: [&str; 7] = [
    "n",
    "step_norm",
    "residual",
    "eps_min",
    "eps_max",
    "dist_to_known",
    "wall_ms",
];

/// Fraction of the largest admissible `lambda` used when none is given.
pub const DEFAULT_LAMBDA_FRACTION: f64 = 0.8;
/// Multiple of the smallest admissible `k` used when none is given.
pub const DEFAULT_K_FACTOR: f64 = 1.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Parallel,
    Maxsel,
    Single,
    Sequential,
    Extragradient,
    Armijo,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Parallel,
        Algorithm::Maxsel,
        Algorithm::Single,
        Algorithm::Sequential,
        Algorithm::Extragradient,
        Algorithm::Armijo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Parallel => "parallel",
            Algorithm::Maxsel => "maxsel",
            Algorithm::Single => "single",
            Algorithm::Sequential => "sequential",
            Algorithm::Extragradient => "extragradient",
            Algorithm::Armijo => "armijo",
        }
    }

    fn uses_k(self) -> bool {
        !matches!(self, Algorithm::Extragradient | Algorithm::Armijo)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| HarnessError::InvalidSpec(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub algorithm: Algorithm,
    /// Derived from the constants when absent.
    pub lambda: Option<f64>,
    pub k: Option<f64>,
    pub eta: f64,
    pub tol: f64,
    pub max_outer: usize,
    pub rule: Rule,
    pub workers: usize,
    pub seed: u64,
    /// Random probes per prox certificate; zero skips certification.
    pub certify_probes: usize,
}

impl RunSpec {
    pub fn new(algorithm: Algorithm) -> Self {
        RunSpec {
            algorithm,
            lambda: None,
            k: None,
            eta: 0.5,
            tol: csep_core::hybrid::DEFAULT_TOL,
            max_outer: csep_core::hybrid::DEFAULT_MAX_OUTER,
            rule: Rule::Strict,
            workers: 1,
            seed: 0,
            certify_probes: 0,
        }
    }
}

/// Outcome of one run together with the parameters actually used.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub algorithm: Algorithm,
    pub lambda: f64,
    pub k: Option<f64>,
    pub outcome: SolverOutcome,
    pub reference: Option<Point>,
    /// Why no reference is available, when it is not.
    pub reference_note: Option<String>,
    pub wall_ms: f64,
}

impl RunReport {
    pub fn distance_to_reference(&self) -> Option<f64> {
        self.reference.as_ref().map(|r| r.dist(&self.outcome.final_x))
    }

    /// 0 on a tolerance stop, 1 when the iteration cap was reached, 3 on a solver error.
    pub fn exit_code(&self) -> i32 {
        match self.outcome.stop_reason {
            StopReason::Tolerance => 0,
            StopReason::MaxOuter => 1,
            StopReason::Error => 3,
        }
    }
}

fn factor(rule: Rule) -> f64 {
    match rule {
        Rule::Strict => 2.0,
        Rule::Relaxed => 1.0,
    }
}

/// `lambda` and `k` after filling in defaults; bounds are checked by the solvers.
pub fn resolve_parameters(problem: &Problem, spec: &RunSpec) -> Result<(f64, Option<f64>)> {
    let inst = &problem.instance;
    let constants = inst.constants()?;
    let c = max_constants(&constants);
    let sum = c.c1 + c.c2;
    let lambda = match (spec.lambda, spec.algorithm) {
        (Some(l), _) => l,
        (None, Algorithm::Extragradient) => {
            DEFAULT_LAMBDA_FRACTION * extragradient_lambda_bound(inst)?
        }
        (None, _) => DEFAULT_LAMBDA_FRACTION / (factor(spec.rule) * sum),
    };
    let k = if spec.algorithm.uses_k() {
        Some(match spec.k {
            Some(k) => k,
            None => {
                let room = 1.0 - factor(spec.rule) * lambda * sum;
                if !(room > 0.0) {
                    return Err(HarnessError::Core(csep_core::CoreError::ParameterViolation(
                        format!("lambda = {lambda} leaves no admissible k"),
                    )));
                }
                DEFAULT_K_FACTOR / room
            }
        })
    } else {
        None
    };
    Ok((lambda, k))
}

/// Executes one run; the reference point, when available, feeds the distance column.
pub fn run(problem: &Problem, spec: &RunSpec) -> Result<RunReport> {
    let inst = &problem.instance;
    let (lambda, k) = resolve_parameters(problem, spec)?;
    let (reference, reference_note) = match reference_solution(inst) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let known = inst
        .known_solution()
        .map(|k| k.representatives())
        .unwrap_or_default();
    let start = Instant::now();
    let clock = move || start.elapsed().as_secs_f64() * 1e3;
    let options = RunOptions {
        reference: reference.as_ref(),
        known_points: &known,
        certify_probes: spec.certify_probes,
        seed: spec.seed,
        record_iterates: false,
        clock: Some(&clock),
    };
    let hybrid = || {
        HybridParams::new(lambda, k.unwrap_or(f64::NAN))
            .with_tol(spec.tol)
            .with_max_outer(spec.max_outer)
            .with_rule(spec.rule)
    };
    let exec = Threaded::new(spec.workers);
    let outcome = match spec.algorithm {
        Algorithm::Parallel => run_parallel_hybrid(inst, &hybrid(), &options, &exec)?,
        Algorithm::Maxsel => run_maxsel_hybrid(inst, &hybrid(), &options, &exec)?,
        Algorithm::Single => run_single(inst, &hybrid(), &options, &exec)?,
        Algorithm::Sequential => run_sequential(inst, &hybrid(), &options, &exec)?,
        Algorithm::Extragradient => {
            run_hybrid_extragradient(inst, lambda, spec.tol, spec.max_outer, &options)?
        }
        Algorithm::Armijo => run_armijo_hybrid(
            inst,
            &ArmijoParams::new(spec.eta, lambda),
            spec.tol,
            spec.max_outer,
            &options,
        )?,
    };
    Ok(RunReport {
        algorithm: spec.algorithm,
        lambda,
        k,
        outcome,
        reference,
        reference_note,
        wall_ms: clock(),
    })
}

fn output_error(path: &Path, e: impl fmt::Display) -> HarnessError {
    HarnessError::Output(format!("{}: {e}", path.display()))
}

fn cell(v: f64) -> String {
    v.to_string()
}

/// Writes one row per outer iteration under the fixed header.
pub fn write_trace<W: Write>(outcome: &SolverOutcome, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in &outcome.trace {
        w.write_record([
            r.n.to_string(),
            cell(r.step_norm),
            cell(r.residual),
            cell(r.eps_min()),
            cell(r.eps_max()),
            r.dist_to_known.map(cell).unwrap_or_default(),
            cell(r.wall_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_file(outcome: &SolverOutcome, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| output_error(path, e))?;
    write_trace(outcome, file).map_err(|e| output_error(path, e))
}

#[derive(Debug, Serialize)]
pub struct Counters {
    pub fejer: usize,
    pub containment: usize,
    pub monotone_distance: usize,
    pub q_projection: usize,
    pub prox_certificate: usize,
    pub prox_unconverged: usize,
    pub checks: usize,
    pub worst_fejer_slack: Option<f64>,
    pub worst_containment_slack: Option<f64>,
    pub worst_certificate: Option<f64>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl From<&InvariantCounters> for Counters {
    fn from(c: &InvariantCounters) -> Self {
        Counters {
            fejer: c.fejer,
            containment: c.containment,
            monotone_distance: c.monotone_distance,
            q_projection: c.q_projection,
            prox_certificate: c.prox_certificate,
            prox_unconverged: c.prox_unconverged,
            checks: c.checks,
            worst_fejer_slack: finite(c.worst_fejer_slack),
            worst_containment_slack: finite(c.worst_containment_slack),
            worst_certificate: finite(c.worst_certificate),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub algorithm: Algorithm,
    pub lambda: f64,
    pub k: Option<f64>,
    pub final_x: Vec<f64>,
    pub stop_reason: &'static str,
    pub iterations: usize,
    pub prox_solves: usize,
    pub set_projections: usize,
    pub final_step_norm: Option<f64>,
    pub final_residual: Option<f64>,
    pub reference: Option<Vec<f64>>,
    pub distance_to_reference: Option<f64>,
    pub reference_note: Option<String>,
    pub invariant_violations: Counters,
    pub wall_ms: f64,
}

pub fn stop_name(s: StopReason) -> &'static str {
    match s {
        StopReason::Tolerance => "tolerance",
        StopReason::MaxOuter => "max_outer",
        StopReason::Error => "error",
    }
}

impl From<&RunReport> for Summary {
    fn from(r: &RunReport) -> Self {
        let o = &r.outcome;
        Summary {
            algorithm: r.algorithm,
            lambda: r.lambda,
            k: r.k,
            final_x: o.final_x.as_slice().to_vec(),
            stop_reason: stop_name(o.stop_reason),
            iterations: o.iterations,
            prox_solves: o.prox_solves,
            set_projections: o.set_projections,
            final_step_norm: o.trace.last().map(|t| t.step_norm),
            final_residual: o.trace.last().map(|t| t.residual),
            reference: r.reference.as_ref().map(|p| p.as_slice().to_vec()),
            distance_to_reference: r.distance_to_reference(),
            reference_note: r.reference_note.clone(),
            invariant_violations: Counters::from(&o.invariant_violations),
            wall_ms: r.wall_ms,
        }
    }
}

pub fn write_summary_file(report: &RunReport, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| output_error(path, e))?;
    serde_json::to_writer_pretty(file, &Summary::from(report)).map_err(|e| output_error(path, e))
}

#[derive(Debug, Serialize)]
pub struct ComparisonRow {
    pub algorithm: Algorithm,
    pub stop_reason: &'static str,
    pub iterations: usize,
    pub prox_solves: usize,
    pub prox_solves_per_iteration: f64,
    pub set_projections: usize,
    pub wall_ms: f64,
    pub distance_to_reference: Option<f64>,
    pub final_x: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    /// Largest distance between two final iterates.
    pub max_pairwise_spread: f64,
}

impl ComparisonReport {
    /// Fixed-width text table.
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<14} {:>10} {:>10} {:>9} {:>12} {:>11} {:>12}  {}\n",
            "algorithm", "iterations", "prox", "prox/it", "proj_C", "wall_ms", "dist_ref", "stop"
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{:<14} {:>10} {:>10} {:>9.3} {:>12} {:>11.1} {:>12}  {}\n",
                r.algorithm.name(),
                r.iterations,
                r.prox_solves,
                r.prox_solves_per_iteration,
                r.set_projections,
                r.wall_ms,
                r.distance_to_reference
                    .map_or_else(|| String::from("-"), |d| format!("{d:.3e}")),
                r.stop_reason,
            ));
        }
        s.push_str(&format!("max pairwise spread {:.3e}\n", self.max_pairwise_spread));
        s
    }
}

/// Runs every specification on its own thread against the same problem.
pub fn compare(problem: &Problem, specs: &[RunSpec]) -> Result<(ComparisonReport, Vec<RunReport>)> {
    let results: Vec<Result<RunReport>> = std::thread::scope(|scope| {
        let handles: Vec<_> = specs
            .iter()
            .map(|spec| scope.spawn(move || run(problem, spec)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("run thread panicked"))
            .collect()
    });
    let reports = results.into_iter().collect::<Result<Vec<_>>>()?;
    let rows = reports
        .iter()
        .map(|r| {
            let o = &r.outcome;
            ComparisonRow {
                algorithm: r.algorithm,
                stop_reason: stop_name(o.stop_reason),
                iterations: o.iterations,
                prox_solves: o.prox_solves,
                prox_solves_per_iteration: o.prox_solves as f64 / o.iterations.max(1) as f64,
                set_projections: o.set_projections,
                wall_ms: r.wall_ms,
                distance_to_reference: r.distance_to_reference(),
                final_x: o.final_x.as_slice().to_vec(),
            }
        })
        .collect();
    let mut spread: f64 = 0.0;
    for a in &reports {
        for b in &reports {
            spread = spread.max(a.outcome.final_x.dist(&b.outcome.final_x));
        }
    }
    Ok((
        ComparisonReport {
            rows,
            max_pairwise_spread: spread,
        },
        reports,
    ))
}
