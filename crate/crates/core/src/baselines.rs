//! Two competitor hybrid methods whose cuts live inside the feasible set.
//!
//! Both compute `x_{n+1}` by projecting `x0` onto `C ∩ C_n ∩ Q_n`, so every
//! outer step runs Dykstra's method over the feasible set and two cuts.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::CoreError;
use crate::geometry::{
    dykstra_attempt, project, project_halfspace_intersection, HalfspaceCut, Piece,
    DEFAULT_INTERSECTION_TOL, DEGENERACY_THRESHOLD,
};
use crate::hybrid::{build_c_cut, build_q_cut, probe_seed, prox_tol, require_single};
use crate::linalg::{check_dim, Point};
use crate::outcome::{InvariantCounters, IterationRecord, RunOptions, SolverOutcome, StopReason, MONOTONE_SLACK};
use crate::problems::{eval_unchecked, subgrad2_unchecked, Bifunction, CsepInstance};
use crate::prox::{certify_prox, solve_prox, ProxResult};

/// Largest admissible prox step for the two-prox scheme: `min(1/(2 c1), 1/(2 c2))`.
pub fn extragradient_lambda_bound(instance: &CsepInstance) -> Result<f64, CoreError> {
    let c = instance.bifunctions()[0].constants()?;
    Ok(f64::min(1.0 / (2.0 * c.c1), 1.0 / (2.0 * c.c2)))
}

fn require_start_in_set(instance: &CsepInstance) -> Result<(), CoreError> {
    if !instance.set().contains(instance.x0(), 1e-12) {
        return Err(CoreError::IncompatibleInstance(format!(
            "starting point must lie in the feasible set (distance {:e})",
            instance.set().violation(instance.x0())
        )));
    }
    Ok(())
}

/// Dykstra cycles per outer step before switching to the exact polyhedral projection.
pub const BASELINE_MAX_CYCLES: usize = 2_000;

struct Tally {
    counters: InvariantCounters,
    prox_solves: usize,
    set_projections: usize,
}

impl Tally {
    fn prox(
        &mut self,
        f: &Bifunction,
        anchor: &Point,
        x: &Point,
        lambda: f64,
        instance: &CsepInstance,
        options: &RunOptions<'_>,
        n: usize,
        tag: usize,
    ) -> Result<ProxResult, CoreError> {
        let set = instance.set();
        let r = solve_prox(f, anchor, x, lambda, set, prox_tol(f))?;
        self.prox_solves += 1;
        self.set_projections += r.set_projections;
        if !r.converged {
            self.counters.prox_unconverged += 1;
        }
        if options.certify_probes > 0 {
            let gap = certify_prox(
                f,
                anchor,
                x,
                lambda,
                set,
                &r.minimizer,
                options.certify_probes,
                probe_seed(options.seed, n, tag),
            );
            self.counters.certificate_check(gap);
        }
        Ok(r)
    }

    fn project_target(
        &mut self,
        instance: &CsepInstance,
        c_cut: &HalfspaceCut,
        q_cut: &HalfspaceCut,
    ) -> Result<Point, CoreError> {
        let pieces = [Piece::Set(instance.set()), Piece::Cut(c_cut), Piece::Cut(q_cut)];
        let run = dykstra_attempt(
            &pieces,
            instance.x0(),
            DEFAULT_INTERSECTION_TOL,
            BASELINE_MAX_CYCLES,
        )?;
        self.set_projections += run.set_projections;
        if run.converged {
            return Ok(run.point);
        }
        // Thin wedges between the two cuts stall Dykstra; polyhedral sets
        // can be finished exactly.
        match instance.set().halfspaces() {
            Some(mut cuts) => {
                cuts.push(c_cut.clone());
                cuts.push(q_cut.clone());
                project_halfspace_intersection(&cuts, instance.x0(), DEFAULT_INTERSECTION_TOL)
            }
            None => Err(CoreError::MaxInnerIterationsExceeded {
                iterations: BASELINE_MAX_CYCLES,
                residual: run.residual,
            }),
        }
    }

    /// Cut containment of every known solution plus monotone growth of `|x_n - x0|`.
    fn check_cuts(
        &mut self,
        options: &RunOptions<'_>,
        cuts: &[&HalfspaceCut],
        x0: &Point,
        x_n: &Point,
        x_next: &Point,
    ) {
        if options.known_points.is_empty() {
            return;
        }
        for x_star in options.known_points {
            for c in cuts {
                self.counters.containment_check(-c.violation(x_star));
            }
        }
        self.counters.checks += 1;
        if x_next.dist(x0) < x_n.dist(x0) - MONOTONE_SLACK {
            self.counters.monotone_distance += 1;
        }
    }
}

/// Hybrid extragradient method: two prox solves per iteration.
pub fn run_hybrid_extragradient(
    instance: &CsepInstance,
    lambda: f64,
    tol: f64,
    max_outer: usize,
    options: &RunOptions<'_>,
) -> Result<SolverOutcome, CoreError> {
    require_single(instance)?;
    let bound = extragradient_lambda_bound(instance)?;
    if !(lambda > 0.0 && lambda < bound) {
        return Err(CoreError::ParameterViolation(format!(
            "lambda = {lambda} must lie in (0, {bound}) for the extragradient scheme"
        )));
    }
    check_loop_params(tol, max_outer)?;
    require_start_in_set(instance)?;

    let f = &instance.bifunctions()[0];
    let x0 = instance.x0().clone();
    let mut x = x0.clone();
    let mut tally = Tally {
        counters: InvariantCounters::new(),
        prox_solves: 0,
        set_projections: 0,
    };
    let mut trace = Vec::new();
    let mut iterates = Vec::new();
    let mut stop = StopReason::MaxOuter;
    let start_ms = options.now_ms();

    for n in 0..max_outer {
        let y = tally.prox(f, &x, &x, lambda, instance, options, n, 0)?.minimizer;
        let z = tally.prox(f, &y, &x, lambda, instance, options, n, 1)?.minimizer;
        let c_cut = build_c_cut(&x, &z, 0.0)?;
        let q_cut = build_q_cut(&x0, &x)?;
        let x_next = tally.project_target(instance, &c_cut, &q_cut)?;

        for x_star in options.known_points {
            tally.counters.fejer_check(x.dist(x_star) - z.dist(x_star));
        }
        tally.check_cuts(options, &[&c_cut, &q_cut], &x0, &x, &x_next);

        let residual = y.dist(&x);
        let step_norm = x_next.dist(&x);
        trace.push(IterationRecord {
            n,
            step_norm,
            residual,
            eps: vec![0.0],
            dist_to_known: options.reference.map(|r| x_next.dist(r)),
            degenerate_cuts: vec![c_cut.is_degenerate(), q_cut.is_degenerate()],
            wall_ms: options.now_ms() - start_ms,
        });
        if options.record_iterates {
            iterates.push(x_next.clone());
        }
        x = x_next;
        if step_norm.max(residual) <= tol {
            stop = StopReason::Tolerance;
            break;
        }
    }

    Ok(SolverOutcome {
        final_x: x,
        stop_reason: stop,
        iterations: trace.len(),
        trace,
        invariant_violations: tally.counters,
        prox_solves: tally.prox_solves,
        set_projections: tally.set_projections,
        iterates,
    })
}

fn check_loop_params(tol: f64, max_outer: usize) -> Result<(), CoreError> {
    if !(tol > 0.0) || max_outer == 0 {
        return Err(CoreError::ParameterViolation(format!(
            "need tol > 0 and max_outer >= 1 (got {tol}, {max_outer})"
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArmijoParams {
    pub eta: f64,
    pub lambda: f64,
    pub max_linesearch: usize,
}

impl ArmijoParams {
    pub fn new(eta: f64, lambda: f64) -> Self {
        ArmijoParams {
            eta,
            lambda,
            max_linesearch: 60,
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(CoreError::ParameterViolation(format!(
                "eta = {} must lie in (0, 1)",
                self.eta
            )));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(CoreError::ParameterViolation(format!(
                "lambda = {} must be positive",
                self.lambda
            )));
        }
        if self.max_linesearch == 0 {
            return Err(CoreError::ParameterViolation(format!(
                "max_linesearch = {} must be at least 1",
                self.max_linesearch
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinesearchResult {
    pub m: usize,
    pub z: Point,
}

/// Smallest `m >= 1` with
/// `f((1 - eta^m) x_n + eta^m y_n, y_n) + |x_n - y_n|^2 / (2 lambda) <= 0`.
pub fn armijo_linesearch(
    f: &Bifunction,
    x_n: &Point,
    y_n: &Point,
    lambda: f64,
    params: &ArmijoParams,
) -> Result<LinesearchResult, CoreError> {
    check_dim(x_n.dim(), y_n.dim())?;
    let gap = x_n.dist_sq(y_n);
    if libm::sqrt(gap) < DEGENERACY_THRESHOLD {
        return Err(CoreError::LinesearchDegenerate);
    }
    let penalty = gap / (2.0 * lambda);
    let mut t = 1.0;
    let mut last_value = f64::NAN;
    for m in 1..=params.max_linesearch {
        t *= params.eta;
        let z = x_n.lerp(y_n, t);
        last_value = eval_unchecked(f, &z, y_n) + penalty;
        if last_value <= 0.0 {
            return Ok(LinesearchResult { m, z });
        }
    }
    Err(CoreError::LinesearchFailed {
        trials: params.max_linesearch,
        last_value,
    })
}

/// `sigma = -eta^m f(z, y) / ((1 - eta^m) |g|^2)`, zero when `g` vanishes.
pub fn armijo_step(eta_m: f64, f_zy: f64, g_norm_sq: f64) -> f64 {
    if g_norm_sq <= DEGENERACY_THRESHOLD * DEGENERACY_THRESHOLD {
        return 0.0;
    }
    -eta_m * f_zy / ((1.0 - eta_m) * g_norm_sq)
}

/// Hybrid method with an Armijo linesearch and a projected subgradient step.
pub fn run_armijo_hybrid(
    instance: &CsepInstance,
    params: &ArmijoParams,
    tol: f64,
    max_outer: usize,
    options: &RunOptions<'_>,
) -> Result<SolverOutcome, CoreError> {
    require_single(instance)?;
    params.validate()?;
    check_loop_params(tol, max_outer)?;
    require_start_in_set(instance)?;

    let f = &instance.bifunctions()[0];
    let set = instance.set();
    let lambda = params.lambda;
    let x0 = instance.x0().clone();
    let mut x = x0.clone();
    let mut tally = Tally {
        counters: InvariantCounters::new(),
        prox_solves: 0,
        set_projections: 0,
    };
    let mut trace = Vec::new();
    let mut iterates = Vec::new();
    let mut stop = StopReason::MaxOuter;
    let start_ms = options.now_ms();

    for n in 0..max_outer {
        let y = tally.prox(f, &x, &x, lambda, instance, options, n, 0)?.minimizer;
        let residual = y.dist(&x);

        if residual < DEGENERACY_THRESHOLD {
            // x_n solves the problem; nothing moves.
            trace.push(IterationRecord {
                n,
                step_norm: 0.0,
                residual,
                eps: vec![0.0],
                dist_to_known: options.reference.map(|r| x.dist(r)),
                degenerate_cuts: vec![true, build_q_cut(&x0, &x)?.is_degenerate()],
                wall_ms: options.now_ms() - start_ms,
            });
            if options.record_iterates {
                iterates.push(x.clone());
            }
            stop = StopReason::Tolerance;
            break;
        }

        let u = match armijo_linesearch(f, &x, &y, lambda, params) {
            Ok(LinesearchResult { m, z }) => {
                let eta_m = libm::pow(params.eta, m as f64);
                let g = subgrad2_unchecked(f, &z, &z);
                let sigma = armijo_step(eta_m, eval_unchecked(f, &z, &y), g.norm_sq());
                tally.set_projections += 1;
                project(set, &x.add_scaled(-sigma, &g))?
            }
            // Rounding can defeat the sufficient-decrease test once the
            // residual is below the stopping tolerance.
            Err(CoreError::LinesearchFailed { .. }) if residual <= tol => x.clone(),
            Err(e) => return Err(e),
        };

        let c_cut = build_c_cut(&x, &u, 0.0)?;
        let q_cut = build_q_cut(&x0, &x)?;
        let x_next = tally.project_target(instance, &c_cut, &q_cut)?;

        for x_star in options.known_points {
            tally.counters.fejer_check(x.dist(x_star) - u.dist(x_star));
        }
        tally.check_cuts(options, &[&c_cut, &q_cut], &x0, &x, &x_next);

        let step_norm = x_next.dist(&x);
        trace.push(IterationRecord {
            n,
            step_norm,
            residual,
            eps: vec![0.0],
            dist_to_known: options.reference.map(|r| x_next.dist(r)),
            degenerate_cuts: vec![c_cut.is_degenerate(), q_cut.is_degenerate()],
            wall_ms: options.now_ms() - start_ms,
        });
        if options.record_iterates {
            iterates.push(x_next.clone());
        }
        x = x_next;
        if step_norm.max(residual) <= tol {
            stop = StopReason::Tolerance;
            break;
        }
    }

    Ok(SolverOutcome {
        final_x: x,
        stop_reason: stop,
        iterations: trace.len(),
        trace,
        invariant_violations: tally.counters,
        prox_solves: tally.prox_solves,
        set_projections: tally.set_projections,
        iterates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FeasibleSet;
    use crate::linalg::Matrix;
    use crate::problems::{LipschitzData, Operator};

    fn p(v: &[f64]) -> Point {
        Point::from_slice(v)
    }

    #[test]
    fn linesearch_accepts_first_trial() {
        // f(x, y) = a (y - x) in 1-D with a chosen so that m = 1 already
        // satisfies the decrease test: z = 0.5, y = 0, x = 1, lambda = 1:
        // f(z, y) + 1/2 = -0.5 a + 0.5 <= 0 for a >= 1.
        let op = Operator::affine(Matrix::zeros(1, 1), p(&[2.0]), Some(1.0)).unwrap();
        let f = Bifunction::vi(op);
        let r = armijo_linesearch(&f, &p(&[1.0]), &p(&[0.0]), 1.0, &ArmijoParams::new(0.5, 1.0)).unwrap();
        assert_eq!(r.m, 1);
        assert_eq!(r.z, p(&[0.5]));
    }

    #[test]
    fn linesearch_third_trial() {
        // f(x, y) = <x, y - x> with x_n = 1, y_n = 0, lambda = 0.8:
        // value(t) = -(1 - t)^2 + 0.625, so t = 0.5, 0.25 fail and t = 0.125 passes.
        let f = Bifunction::vi(Operator::linear(Matrix::identity(1)).unwrap());
        let r = armijo_linesearch(&f, &p(&[1.0]), &p(&[0.0]), 0.8, &ArmijoParams::new(0.5, 0.8)).unwrap();
        assert_eq!(r.m, 3);
        assert!((r.z[0] - 0.875).abs() < 1e-15);

        let x = p(&[1.0, -2.0]);
        let y = p(&[3.0, 4.0]);
        let z = x.lerp(&y, 0.125);
        let expected = x.scaled(0.875).add_scaled(0.125, &y);
        assert!(z.dist(&expected) < 1e-15);
    }

    #[test]
    fn linesearch_degenerate_and_failure() {
        let f = Bifunction::vi(Operator::linear(Matrix::identity(1)).unwrap());
        assert_eq!(
            armijo_linesearch(&f, &p(&[1.0]), &p(&[1.0]), 1.0, &ArmijoParams::new(0.5, 1.0)),
            Err(CoreError::LinesearchDegenerate)
        );
        let mut params = ArmijoParams::new(0.5, 1.0);
        params.max_linesearch = 1;
        assert!(matches!(
            armijo_linesearch(&f, &p(&[1.0]), &p(&[0.0]), 1.0, &params),
            Err(CoreError::LinesearchFailed { trials: 1, .. })
        ));
    }

    #[test]
    fn armijo_step_zero_subgradient() {
        assert_eq!(armijo_step(0.5, -1.0, 0.0), 0.0);
        assert!((armijo_step(0.5, -1.0, 2.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn armijo_params_validation() {
        assert!(ArmijoParams::new(1.0, 0.3).validate().is_err());
        assert!(ArmijoParams::new(0.5, -0.3).validate().is_err());
        assert!(ArmijoParams::new(0.5, 0.3).validate().is_ok());
    }

    #[test]
    fn zero_bifunction_stops_at_start() {
        let zero = Operator::affine(Matrix::zeros(2, 2), Point::zeros(2), Some(1.0)).unwrap();
        let set = FeasibleSet::cube(2, -1.0, 1.0).unwrap();
        let inst = CsepInstance::new(2, set, vec![Bifunction::vi(zero)], p(&[0.4, -0.2])).unwrap();
        let out = run_hybrid_extragradient(&inst, 0.4, 1e-8, 100, &RunOptions::default()).unwrap();
        assert_eq!(out.stop_reason, StopReason::Tolerance);
        assert_eq!(out.iterations, 1);
        assert_eq!(out.final_x, p(&[0.4, -0.2]));
        let out = run_armijo_hybrid(&inst, &ArmijoParams::new(0.5, 0.3), 1e-8, 100, &RunOptions::default())
            .unwrap();
        assert_eq!(out.stop_reason, StopReason::Tolerance);
        assert_eq!(out.final_x, p(&[0.4, -0.2]));
    }

    #[test]
    fn extragradient_lambda_range() {
        let f = Bifunction::vi(Operator::linear(Matrix::identity(1)).unwrap())
            .with_constants(LipschitzData::new(0.5, 1.0).unwrap());
        let set = FeasibleSet::cube(1, -1.0, 1.0).unwrap();
        let inst = CsepInstance::new(1, set, vec![f], p(&[1.0])).unwrap();
        assert_eq!(extragradient_lambda_bound(&inst).unwrap(), 0.5);
        assert!(matches!(
            run_hybrid_extragradient(&inst, 0.5, 1e-8, 10, &RunOptions::default()),
            Err(CoreError::ParameterViolation(_))
        ));
    }

    #[test]
    fn baselines_require_start_in_set() {
        let f = Bifunction::vi(Operator::linear(Matrix::identity(1)).unwrap());
        let set = FeasibleSet::cube(1, -1.0, 1.0).unwrap();
        let inst = CsepInstance::new(1, set, vec![f], p(&[2.0])).unwrap();
        assert!(matches!(
            run_hybrid_extragradient(&inst, 0.4, 1e-8, 10, &RunOptions::default()),
            Err(CoreError::IncompatibleInstance(_))
        ));
    }
}
