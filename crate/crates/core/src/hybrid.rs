//! Extragradient-free hybrid methods.
//!
//! Each outer iteration solves one prox subproblem per bifunction (or per
//! selected bifunction), turns the result into the quadratic cut
//! `|y_{n+1} - z|^2 <= |x_n - z|^2 + eps_n`, which is a halfspace in `z`, adds
//! the anchor cut `<x0 - x_n, z - x_n> <= 0`, and sets `x_{n+1}` to the
//! projection of `x0` onto the intersection of the cuts. The feasible set only
//! enters through the prox step.
//!
//! Four schemes share this loop:
//!
//! * [`run_parallel_hybrid`]: one cut per bifunction, `N + 1` halfspaces;
//! * [`run_maxsel_hybrid`]: only the prox point farthest from `x_n` is kept,
//!   so the projection is onto two halfspaces;
//! * [`run_single`]: the `N = 1` case;
//! * [`run_sequential`]: one bifunction per iteration, cycling through them.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::CoreError;
use crate::exec::Executor;
use crate::geometry::{
    project_halfspace, project_halfspace_intersection, project_two_halfspaces, HalfspaceCut,
    DEFAULT_INTERSECTION_TOL, DEGENERACY_THRESHOLD, DEGENERATE_OFFSET_TOL,
};
use crate::linalg::{check_dim, Point};
use crate::outcome::{
    InvariantCounters, IterationRecord, RunOptions, SolverOutcome, StopReason, MONOTONE_SLACK,
    Q_PROJECTION_TOL,
};
use crate::problems::{Bifunction, BifunctionKind, CsepInstance, LipschitzData};
use crate::prox::{
    certify_prox, solve_prox, ProxResult, FAST_PATH_TOL, PROJECTED_GRADIENT_TOL, SUBGRADIENT_TOL,
};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_OUTER: usize = 100_000;

/// Which family of step-size bounds the parameters must satisfy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Rule {
    /// `lambda < 1 / (2 (c1 + c2))`, `k > 1 / (1 - 2 lambda (c1 + c2))`.
    #[default]
    Strict,
    /// `lambda < 1 / (c1 + c2)`, `k > 1 / (1 - lambda (c1 + c2))`.
    Relaxed,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HybridParams {
    pub lambda: f64,
    pub k: f64,
    pub tol: f64,
    pub max_outer: usize,
    pub rule: Rule,
}

impl HybridParams {
    pub fn new(lambda: f64, k: f64) -> Self {
        HybridParams {
            lambda,
            k,
            tol: DEFAULT_TOL,
            max_outer: DEFAULT_MAX_OUTER,
            rule: Rule::Strict,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_outer(mut self, max_outer: usize) -> Self {
        self.max_outer = max_outer;
        self
    }

    pub fn with_rule(mut self, rule: Rule) -> Self {
        self.rule = rule;
        self
    }

    /// Checks `lambda` and `k` against the selected rule using the largest
    /// `c1` and the largest `c2` over all bifunctions.
    pub fn validate(&self, constants: &[LipschitzData]) -> Result<(), CoreError> {
        let c = max_constants(constants);
        let sum = c.c1 + c.c2;
        let factor = match self.rule {
            Rule::Strict => 2.0,
            Rule::Relaxed => 1.0,
        };
        if !(self.lambda > 0.0) || !(self.lambda * factor * sum < 1.0) {
            return Err(CoreError::ParameterViolation(format!(
                "lambda = {} must lie in (0, {}) for the {:?} rule with c1 + c2 = {}",
                self.lambda,
                1.0 / (factor * sum),
                self.rule,
                sum
            )));
        }
        let k_min = 1.0 / (1.0 - factor * self.lambda * sum);
        if !(self.k > k_min) || !self.k.is_finite() {
            return Err(CoreError::ParameterViolation(format!(
                "k = {} must exceed {k_min} for the {:?} rule",
                self.k, self.rule
            )));
        }
        if !(self.tol > 0.0) {
            return Err(CoreError::ParameterViolation(format!(
                "tol = {} must be positive",
                self.tol
            )));
        }
        if self.max_outer == 0 {
            return Err(CoreError::ParameterViolation(String::from(
                "max_outer must be at least 1",
            )));
        }
        Ok(())
    }
}

/// Componentwise maximum of the constants.
pub fn max_constants(constants: &[LipschitzData]) -> LipschitzData {
    constants.iter().fold(LipschitzData { c1: 0.0, c2: 0.0 }, |m, c| LipschitzData {
        c1: m.c1.max(c.c1),
        c2: m.c2.max(c.c2),
    })
}

/// Correction term `k dx + 2 lambda c1 dy_prev - (1 - 1/k - 2 lambda c2) dy`
/// where the arguments are squared norms. The sign is kept.
pub fn epsilon(params: &HybridParams, lip: &LipschitzData, dx: f64, dy_prev: f64, dy: f64) -> f64 {
    let lambda = params.lambda;
    let k = params.k;
    k * dx + 2.0 * lambda * lip.c1 * dy_prev - (1.0 - 1.0 / k - 2.0 * lambda * lip.c2) * dy
}

/// Linearizes `|y_next - z|^2 <= |x_n - z|^2 + eps` to
/// `2 <x_n - y_next, z> <= |x_n|^2 - |y_next|^2 + eps`.
///
/// The offset is evaluated as `<x_n - y_next, x_n + y_next>` to avoid
/// cancellation when the two points nearly coincide.
pub fn build_c_cut(x_n: &Point, y_next: &Point, eps: f64) -> Result<HalfspaceCut, CoreError> {
    check_dim(x_n.dim(), y_next.dim())?;
    let offset = (x_n - y_next).dot(&(x_n + y_next)) + eps;
    if x_n.dist(y_next) < DEGENERACY_THRESHOLD {
        if offset < -DEGENERATE_OFFSET_TOL {
            return Err(CoreError::InfeasibleCut { value: offset });
        }
        return Ok(HalfspaceCut::whole_space(x_n.dim()));
    }
    HalfspaceCut::new((x_n - y_next).scaled(2.0), offset)
}

/// The anchor cut `<x0 - x_n, z - x_n> <= 0`; the whole space when `x_n = x0`.
pub fn build_q_cut(x0: &Point, x_n: &Point) -> Result<HalfspaceCut, CoreError> {
    check_dim(x0.dim(), x_n.dim())?;
    let normal = x0 - x_n;
    if normal.norm() < DEGENERACY_THRESHOLD {
        return Ok(HalfspaceCut::whole_space(x0.dim()));
    }
    let offset = normal.dot(x_n);
    HalfspaceCut::new(normal, offset)
}

/// Iterates of the outer loop at index `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationState {
    pub n: usize,
    pub x_prev: Point,
    pub x: Point,
    /// `y_{n-1}` per tracked sequence.
    pub y_prev: Vec<Point>,
    /// `y_n` per tracked sequence.
    pub y: Vec<Point>,
    pub x0: Point,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Scheme {
    Parallel,
    MaxSelection,
    Sequential,
}

/// Inner tolerance matched to the bifunction family.
pub(crate) fn prox_tol(f: &Bifunction) -> f64 {
    match f.kind() {
        BifunctionKind::ViInduced(_) => FAST_PATH_TOL,
        BifunctionKind::AffineQuadratic { .. } => PROJECTED_GRADIENT_TOL,
        BifunctionKind::BlackBox { .. } => SUBGRADIENT_TOL,
    }
}

/// Per-solve seed for certificate probes.
pub(crate) fn probe_seed(seed: u64, n: usize, i: usize) -> u64 {
    seed ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (i as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9)
}

struct SolvedProx {
    result: ProxResult,
    certificate: Option<f64>,
}

/// Parallel hybrid method with one cut per bifunction.
pub fn run_parallel_hybrid<E: Executor>(
    instance: &CsepInstance,
    params: &HybridParams,
    options: &RunOptions<'_>,
    executor: &E,
) -> Result<SolverOutcome, CoreError> {
    run_scheme(Scheme::Parallel, instance, params, options, executor)
}

/// Hybrid method keeping only the prox point farthest from `x_n`.
pub fn run_maxsel_hybrid<E: Executor>(
    instance: &CsepInstance,
    params: &HybridParams,
    options: &RunOptions<'_>,
    executor: &E,
) -> Result<SolverOutcome, CoreError> {
    run_scheme(Scheme::MaxSelection, instance, params, options, executor)
}

/// Hybrid method for a single equilibrium problem.
pub fn run_single<E: Executor>(
    instance: &CsepInstance,
    params: &HybridParams,
    options: &RunOptions<'_>,
    executor: &E,
) -> Result<SolverOutcome, CoreError> {
    require_single(instance)?;
    run_scheme(Scheme::MaxSelection, instance, params, options, executor)
}

/// Cyclic variant: iteration `n` uses bifunction `n mod N` (zero-based).
pub fn run_sequential<E: Executor>(
    instance: &CsepInstance,
    params: &HybridParams,
    options: &RunOptions<'_>,
    executor: &E,
) -> Result<SolverOutcome, CoreError> {
    run_scheme(Scheme::Sequential, instance, params, options, executor)
}

pub(crate) fn require_single(instance: &CsepInstance) -> Result<(), CoreError> {
    if instance.len() != 1 {
        return Err(CoreError::IncompatibleInstance(format!(
            "expected a single bifunction, got {}",
            instance.len()
        )));
    }
    Ok(())
}

/// One-based index of the bifunction used at outer step `n` by the cyclic variant.
pub fn cyclic_index(n: usize, count: usize) -> usize {
    n % count + 1
}

fn run_scheme<E: Executor>(
    scheme: Scheme,
    instance: &CsepInstance,
    params: &HybridParams,
    options: &RunOptions<'_>,
    executor: &E,
) -> Result<SolverOutcome, CoreError> {
    let constants = instance.constants()?;
    params.validate(&constants)?;
    for p in options.known_points {
        check_dim(instance.dimension(), p.dim())?;
    }
    let shared = max_constants(&constants);
    let set = instance.set();
    let fs = instance.bifunctions();
    let count = fs.len();
    let x0 = instance.x0().clone();
    let start_ms = options.now_ms();

    // x_1 = x_0 and y_0 = y_1 = P_C(x_0) for every tracked sequence.
    let y_init = crate::geometry::project(set, &x0)?;
    let sequences = match scheme {
        Scheme::Parallel => count,
        Scheme::MaxSelection | Scheme::Sequential => 1,
    };
    let mut state = IterationState {
        n: 1,
        x_prev: x0.clone(),
        x: x0.clone(),
        y_prev: vec![y_init.clone(); sequences],
        y: vec![y_init.clone(); sequences],
        x0: x0.clone(),
    };
    let mut latest = vec![y_init; count];

    let mut trace = Vec::new();
    let mut iterates = Vec::new();
    let mut counters = InvariantCounters::new();
    let mut prox_solves = 0;
    let mut set_projections = 1;
    let mut stop = StopReason::MaxOuter;

    while state.n <= params.max_outer {
        let n = state.n;

        // Step 1: prox solves.
        let jobs: Vec<(usize, &Point)> = match scheme {
            Scheme::Parallel => (0..count).map(|i| (i, &state.y[i])).collect(),
            Scheme::MaxSelection => (0..count).map(|i| (i, &state.y[0])).collect(),
            Scheme::Sequential => vec![(n % count, &state.y[0])],
        };
        let x_n = &state.x;
        let solved: Vec<Result<SolvedProx, CoreError>> = executor.map(jobs.len(), |j| {
            let (i, anchor) = jobs[j];
            let f = &fs[i];
            let result = solve_prox(f, anchor, x_n, params.lambda, set, prox_tol(f))?;
            let certificate = (options.certify_probes > 0).then(|| {
                certify_prox(
                    f,
                    anchor,
                    x_n,
                    params.lambda,
                    set,
                    &result.minimizer,
                    options.certify_probes,
                    probe_seed(options.seed, n, i),
                )
            });
            Ok(SolvedProx {
                result,
                certificate,
            })
        });
        let mut y_next = Vec::with_capacity(solved.len());
        for s in solved {
            let s = s?;
            prox_solves += 1;
            set_projections += s.result.set_projections;
            if !s.result.converged {
                counters.prox_unconverged += 1;
            }
            if let Some(gap) = s.certificate {
                counters.certificate_check(gap);
            }
            y_next.push(s.result.minimizer);
        }
        for (&(i, _), y) in jobs.iter().zip(&y_next) {
            latest[i] = y.clone();
        }

        // Residual max_i |y^i_{n+1} - x_n|, the quantity driven to zero.
        let residual = match scheme {
            Scheme::Sequential => latest.iter().map(|y| y.dist(x_n)).fold(0.0, f64::max),
            _ => y_next.iter().map(|y| y.dist(x_n)).fold(0.0, f64::max),
        };

        // Selection: which prox points feed the C-cuts, per tracked sequence.
        let selected: Vec<(Point, LipschitzData)> = match scheme {
            Scheme::Parallel => y_next.iter().cloned().zip(constants.iter().copied()).collect(),
            Scheme::MaxSelection => {
                let mut best = 0;
                let mut best_dist = y_next[0].dist(x_n);
                for (i, y) in y_next.iter().enumerate().skip(1) {
                    let d = y.dist(x_n);
                    if d > best_dist {
                        best = i;
                        best_dist = d;
                    }
                }
                vec![(y_next[best].clone(), shared)]
            }
            Scheme::Sequential => vec![(y_next[0].clone(), shared)],
        };

        // Step 2: cuts.
        let dx = state.x.dist_sq(&state.x_prev);
        let mut eps = Vec::with_capacity(selected.len());
        let mut cuts = Vec::with_capacity(selected.len() + 1);
        for (s, (y_sel, lip)) in selected.iter().enumerate() {
            let dy_prev = state.y[s].dist_sq(&state.y_prev[s]);
            let dy = y_sel.dist_sq(&state.y[s]);
            let e = epsilon(params, lip, dx, dy_prev, dy);
            cuts.push(build_c_cut(x_n, y_sel, e)?);
            eps.push(e);
        }
        let q_cut = build_q_cut(&x0, x_n)?;
        cuts.push(q_cut.clone());

        let x_next = match scheme {
            Scheme::Parallel => project_halfspace_intersection(&cuts, &x0, DEFAULT_INTERSECTION_TOL)?,
            Scheme::MaxSelection | Scheme::Sequential => {
                project_two_halfspaces(&cuts[0], &cuts[1], &x0)?
            }
        };
        if !x_next.is_finite() {
            return Err(CoreError::NonFiniteObjective);
        }

        // Checks against known solutions.
        if !options.known_points.is_empty() {
            for x_star in options.known_points {
                let base = x_n.dist_sq(x_star);
                let fejer_points: &[Point] = match scheme {
                    Scheme::MaxSelection => &y_next,
                    _ => &[],
                };
                for (s, (y_sel, _)) in selected.iter().enumerate() {
                    counters.fejer_check(base + eps[s] - y_sel.dist_sq(x_star));
                }
                for y in fejer_points {
                    counters.fejer_check(base + eps[0] - y.dist_sq(x_star));
                }
                for c in &cuts {
                    counters.containment_check(-c.violation(x_star));
                }
            }
            counters.checks += 2;
            if x_next.dist(&x0) < x_n.dist(&x0) - MONOTONE_SLACK {
                counters.monotone_distance += 1;
            }
            if project_halfspace(&q_cut, &x0)?.dist(x_n) > Q_PROJECTION_TOL * (1.0 + x0.norm()) {
                counters.q_projection += 1;
            }
        }

        let step_norm = x_next.dist(x_n);
        trace.push(IterationRecord {
            n,
            step_norm,
            residual,
            eps,
            dist_to_known: options.reference.map(|r| x_next.dist(r)),
            degenerate_cuts: cuts.iter().map(HalfspaceCut::is_degenerate).collect(),
            wall_ms: options.now_ms() - start_ms,
        });
        if options.record_iterates {
            iterates.push(x_next.clone());
        }

        // Shift n -> n + 1.
        for (s, (y_sel, _)) in selected.into_iter().enumerate() {
            let old = core::mem::replace(&mut state.y[s], y_sel);
            state.y_prev[s] = old;
        }
        state.x_prev = core::mem::replace(&mut state.x, x_next);
        state.n += 1;

        if step_norm.max(residual) <= params.tol {
            stop = StopReason::Tolerance;
            break;
        }
    }

    Ok(SolverOutcome {
        final_x: state.x,
        stop_reason: stop,
        iterations: trace.len(),
        trace,
        invariant_violations: counters,
        prox_solves,
        set_projections,
        iterates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::geometry::FeasibleSet;
    use crate::linalg::Matrix;
    use crate::problems::Operator;

    fn p(v: &[f64]) -> Point {
        Point::from_slice(v)
    }

    fn lip(c1: f64, c2: f64) -> LipschitzData {
        LipschitzData { c1, c2 }
    }

    #[test]
    fn epsilon_examples() {
        let params = HybridParams::new(0.2, 6.0);
        let e = epsilon(&params, &lip(1.0, 1.0), 1.0, 1.0, 1.0);
        assert!((e - (6.0 + 0.4 - (1.0 - 1.0 / 6.0 - 0.4))).abs() < 1e-15);
        assert!((e - 5.966_666_666_666_667).abs() < 1e-12);
        assert_eq!(epsilon(&params, &lip(1.0, 1.0), 0.0, 0.0, 0.0), 0.0);

        // L = 1 gives c1 = c2 = 1/2; coefficients lambda L and 1 - 1/k - lambda L.
        let vi = HybridParams::new(0.5, 3.0);
        let e = epsilon(&vi, &lip(0.5, 0.5), 0.0, 1.0, 1.0);
        assert!((e - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn epsilon_keeps_negative_values() {
        let params = HybridParams::new(0.2, 6.0);
        assert!(epsilon(&params, &lip(1.0, 1.0), 0.0, 0.0, 1.0) < 0.0);
    }

    #[test]
    fn c_cut_examples() {
        let c = build_c_cut(&p(&[1.0, 0.0]), &p(&[0.0, 0.0]), 0.0).unwrap();
        assert_eq!(c.normal(), &p(&[2.0, 0.0]));
        assert_eq!(c.offset(), 1.0);

        let whole = build_c_cut(&p(&[1.0, 2.0]), &p(&[1.0, 2.0]), 0.5).unwrap();
        assert!(whole.is_degenerate());

        // Points equidistant from 0 and 1.
        let c = build_c_cut(&p(&[0.0]), &p(&[1.0]), 0.0).unwrap();
        assert_eq!((c.normal()[0], c.offset()), (-2.0, -1.0));
        assert_eq!(c.violation(&p(&[0.5])), 0.0);
        assert!(c.violation(&p(&[0.6])) < 0.0);
        assert!(c.violation(&p(&[0.4])) > 0.0);
    }

    #[test]
    fn c_cut_infeasible_when_degenerate_and_negative() {
        assert!(matches!(
            build_c_cut(&p(&[1.0]), &p(&[1.0]), -0.5),
            Err(CoreError::InfeasibleCut { .. })
        ));
    }

    #[test]
    fn q_cut_examples() {
        let q = build_q_cut(&p(&[1.0, 0.0]), &p(&[0.0, 0.0])).unwrap();
        assert_eq!((q.normal().clone(), q.offset()), (p(&[1.0, 0.0]), 0.0));
        assert!(build_q_cut(&p(&[1.0, 0.0]), &p(&[1.0, 0.0])).unwrap().is_degenerate());
        let q = build_q_cut(&p(&[0.0, 0.0]), &p(&[1.0, 1.0])).unwrap();
        assert_eq!((q.normal().clone(), q.offset()), (p(&[-1.0, -1.0]), -2.0));
        assert_eq!(q.violation(&p(&[1.0, 1.0])), 0.0);
    }

    #[test]
    fn strict_rule_bounds() {
        let c = [lip(0.5, 0.5)];
        assert!(HybridParams::new(0.4, 6.0).validate(&c).is_ok());
        // k must exceed 1 / (1 - 0.8) = 5.
        assert!(HybridParams::new(0.4, 5.0).validate(&c).is_err());
        assert!(HybridParams::new(0.5, 100.0).validate(&c).is_err());
        assert!(HybridParams::new(1.0, 100.0).validate(&c).is_err());
        assert!(HybridParams::new(0.0, 100.0).validate(&c).is_err());
        // Relaxed admits lambda up to 1 / (c1 + c2) = 1.
        let relaxed = HybridParams::new(0.9, 11.0).with_rule(Rule::Relaxed);
        assert!(relaxed.validate(&c).is_ok());
        assert!(HybridParams::new(0.9, 11.0).validate(&c).is_err());
    }

    #[test]
    fn heterogeneous_constants_use_maxima() {
        let c = [lip(1.0, 0.1), lip(0.1, 1.0)];
        assert_eq!(max_constants(&c), lip(1.0, 1.0));
        assert!(HybridParams::new(0.3, 100.0).validate(&c).is_err());
        assert!(HybridParams::new(0.2, 100.0).validate(&c).is_ok());
    }

    #[test]
    fn cyclic_indices() {
        let seq: Vec<usize> = (1..=4).map(|n| cyclic_index(n, 3)).collect();
        assert_eq!(seq, vec![2, 3, 1, 2]);
        assert!((1..10).all(|n| cyclic_index(n, 1) == 1));
    }

    #[test]
    fn parameter_violation_before_iterating() {
        let set = FeasibleSet::cube(2, -1.0, 1.0).unwrap();
        let f = Bifunction::vi(Operator::linear(Matrix::identity(2)).unwrap());
        let inst = CsepInstance::new(2, set, vec![f], p(&[0.5, 0.5])).unwrap();
        let r = run_parallel_hybrid(&inst, &HybridParams::new(1.0, 10.0), &RunOptions::default(), &Sequential);
        assert!(matches!(r, Err(CoreError::ParameterViolation(_))));
    }

    #[test]
    fn single_requires_one_bifunction() {
        let set = FeasibleSet::cube(2, -1.0, 1.0).unwrap();
        let f = Bifunction::vi(Operator::linear(Matrix::identity(2)).unwrap());
        let inst = CsepInstance::new(2, set, vec![f.clone(), f], p(&[0.5, 0.5])).unwrap();
        let r = run_single(&inst, &HybridParams::new(0.4, 6.0), &RunOptions::default(), &Sequential);
        assert!(matches!(r, Err(CoreError::IncompatibleInstance(_))));
    }

    #[test]
    fn max_outer_cap_limits_trace() {
        let set = FeasibleSet::cube(2, -1.0, 1.0).unwrap();
        let f = Bifunction::vi(Operator::linear(Matrix::diagonal(&[1.0, 0.0])).unwrap());
        let inst = CsepInstance::new(2, set, vec![f], p(&[0.5, 0.3])).unwrap();
        let params = HybridParams::new(0.4, 6.0).with_max_outer(3);
        let out = run_single(&inst, &params, &RunOptions::default(), &Sequential).unwrap();
        assert_eq!(out.stop_reason, StopReason::MaxOuter);
        assert_eq!(out.trace.len(), 3);
        assert_eq!(out.iterations, 3);
    }
}
