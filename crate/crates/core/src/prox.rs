//! The strongly convex subproblem `argmin_{y in C} lambda f(w, y) + |x - y|^2 / 2`.

use crate::error::CoreError;
use crate::geometry::{project, FeasibleSet};
use crate::linalg::{check_dim, Matrix, Point};
use crate::problems::{eval_unchecked, subgrad2_unchecked, Bifunction, BifunctionKind};
use crate::sampling;

pub const FAST_PATH_TOL: f64 = 1e-12;
pub const PROJECTED_GRADIENT_TOL: f64 = 1e-10;
pub const SUBGRADIENT_TOL: f64 = 1e-8;
pub const MAX_INNER_ITERATIONS: usize = 100_000;

#[derive(Clone, Debug, PartialEq)]
pub struct ProxResult {
    pub minimizer: Point,
    /// Worst certificate value over random probes, when certification ran.
    pub certificate_gap: Option<f64>,
    pub inner_iterations: usize,
    /// Projections onto `C` spent on this solve.
    pub set_projections: usize,
    /// False when an iterative path stopped at its cap; the minimizer is then the best iterate.
    pub converged: bool,
}

/// Which inner method to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ProxMethod {
    /// Closed forms where available, iterative methods otherwise.
    #[default]
    Auto,
    /// Projected subgradient with averaging, for any bifunction.
    Subgradient,
}

/// Value of the prox objective at `y`.
pub fn prox_objective(f: &Bifunction, w: &Point, x: &Point, lambda: f64, y: &Point) -> f64 {
    lambda * eval_unchecked(f, w, y) + 0.5 * x.dist_sq(y)
}

/// Solves the prox subproblem to `tol` in norm.
pub fn solve_prox(
    f: &Bifunction,
    w: &Point,
    x: &Point,
    lambda: f64,
    set: &FeasibleSet,
    tol: f64,
) -> Result<ProxResult, CoreError> {
    solve_prox_with(f, w, x, lambda, set, tol, ProxMethod::Auto)
}

pub fn solve_prox_with(
    f: &Bifunction,
    w: &Point,
    x: &Point,
    lambda: f64,
    set: &FeasibleSet,
    tol: f64,
    method: ProxMethod,
) -> Result<ProxResult, CoreError> {
    check_dim(w.dim(), x.dim())?;
    set.check_dim(x.dim())?;
    if !(lambda > 0.0) {
        return Err(CoreError::ParameterViolation(alloc::format!(
            "prox step lambda = {lambda} must be positive"
        )));
    }
    let result = match (method, f.kind()) {
        (ProxMethod::Auto, BifunctionKind::ViInduced(op)) => {
            // argmin lambda <A(w), y - w> + |x - y|^2 / 2 = P_C(x - lambda A(w))
            let shifted = x.add_scaled(-lambda, &op.apply(w));
            ProxResult {
                minimizer: project(set, &shifted)?,
                certificate_gap: None,
                inner_iterations: 1,
                set_projections: 1,
                converged: true,
            }
        }
        (ProxMethod::Auto, BifunctionKind::AffineQuadratic { p, q_mat, q }) => {
            affine_quadratic_prox(p, q_mat, q, w, x, lambda, set, tol)?
        }
        _ => subgradient_prox(f, w, x, lambda, set, tol)?,
    };
    if !result.minimizer.is_finite() {
        return Err(CoreError::NonFiniteObjective);
    }
    Ok(result)
}

#[allow(clippy::too_many_arguments)]
fn affine_quadratic_prox(
    p: &Matrix,
    q_mat: &Matrix,
    q: &Point,
    w: &Point,
    x: &Point,
    lambda: f64,
    set: &FeasibleSet,
    tol: f64,
) -> Result<ProxResult, CoreError> {
    // Objective gradient: lambda (c + (Q + Q^T) y) + y - x with c = P w + q - Q^T w.
    let mut c = p.mul_vec(w);
    c.axpy(1.0, q);
    c.axpy(-1.0, &q_mat.tr_mul_vec(w));
    let sym = q_mat.add(&q_mat.transpose());
    let rhs = x.add_scaled(-lambda, &c);

    let separable = q_mat.is_diagonal()
        && matches!(set, FeasibleSet::Box { .. } | FeasibleSet::WholeSpace);
    if separable {
        let mut y = Point::zeros(x.dim());
        for j in 0..x.dim() {
            let curvature = 1.0 + lambda * sym[(j, j)];
            if !(curvature > 0.0) {
                return Err(CoreError::NonFiniteObjective);
            }
            y[j] = rhs[j] / curvature;
        }
        return Ok(ProxResult {
            minimizer: project(set, &y)?,
            certificate_gap: None,
            inner_iterations: 1,
            set_projections: 1,
            converged: true,
        });
    }
    if matches!(set, FeasibleSet::WholeSpace) {
        let system = Matrix::identity(x.dim()).add(&sym.scaled(lambda));
        return Ok(ProxResult {
            minimizer: system.solve(&rhs)?,
            certificate_gap: None,
            inner_iterations: 1,
            set_projections: 0,
            converged: true,
        });
    }

    let lg = 1.0 + lambda * sym.spectral_norm();
    let step = 1.0 / lg;
    let mut y = project(set, x)?;
    let mut projections = 1;
    for it in 1..=MAX_INNER_ITERATIONS {
        let mut grad = c.add_scaled(1.0, &sym.mul_vec(&y)).scaled(lambda);
        grad.axpy(1.0, &y);
        grad.axpy(-1.0, x);
        let next = project(set, &y.add_scaled(-step, &grad))?;
        projections += 1;
        if !next.is_finite() {
            return Err(CoreError::NonFiniteObjective);
        }
        let moved = next.dist(&y);
        y = next;
        if moved <= 0.5 * tol / lg {
            return Ok(ProxResult {
                minimizer: y,
                certificate_gap: None,
                inner_iterations: it,
                set_projections: projections,
                converged: true,
            });
        }
    }
    Ok(ProxResult {
        minimizer: y,
        certificate_gap: None,
        inner_iterations: MAX_INNER_ITERATIONS,
        set_projections: projections,
        converged: false,
    })
}

/// Projected subgradient with steps `2/(k+2)` and `(k+1)`-weighted averaging;
/// returns whichever of the last iterate and the average scores lower.
fn subgradient_prox(
    f: &Bifunction,
    w: &Point,
    x: &Point,
    lambda: f64,
    set: &FeasibleSet,
    tol: f64,
) -> Result<ProxResult, CoreError> {
    let mut y = project(set, x)?;
    let mut projections = 1;
    let mut avg = y.clone();
    let mut weight_sum = 1.0;
    let mut converged = false;
    let mut iterations = MAX_INNER_ITERATIONS;
    for k in 0..MAX_INNER_ITERATIONS {
        let step = 2.0 / (k as f64 + 2.0);
        let mut g = subgrad2_unchecked(f, w, &y).scaled(lambda);
        g.axpy(1.0, &y);
        g.axpy(-1.0, x);
        let next = project(set, &y.add_scaled(-step, &g))?;
        projections += 1;
        if !next.is_finite() {
            return Err(CoreError::NonFiniteObjective);
        }
        let moved = next.dist(&y);
        y = next;
        let weight = k as f64 + 2.0;
        weight_sum += weight;
        avg = avg.lerp(&y, weight / weight_sum);
        if moved <= tol {
            converged = true;
            iterations = k + 1;
            break;
        }
    }
    let best = if prox_objective(f, w, x, lambda, &avg) < prox_objective(f, w, x, lambda, &y) {
        avg
    } else {
        y
    };
    Ok(ProxResult {
        minimizer: best,
        certificate_gap: None,
        inner_iterations: iterations,
        set_projections: projections,
        converged,
    })
}

/// Worst value of `<r - x, y - r> - lambda (f(w, r) - f(w, y))` over random
/// probes `y` in `C`, where `r` is the candidate minimizer. Nonnegative values
/// certify optimality of `r`.
#[allow(clippy::too_many_arguments)]
pub fn certify_prox(
    f: &Bifunction,
    w: &Point,
    x: &Point,
    lambda: f64,
    set: &FeasibleSet,
    result: &Point,
    probes: usize,
    seed: u64,
) -> f64 {
    let mut rng = sampling::rng(seed);
    let r_minus_x = result - x;
    let f_result = eval_unchecked(f, w, result);
    let far = 1.0 + result.norm() + x.norm();
    let near = 1e-3 * far;
    let mut worst = f64::INFINITY;
    for i in 0..probes {
        let spread = if i % 2 == 0 { far } else { near };
        let Ok(y) = sampling::in_set(&mut rng, set, result, spread) else {
            continue;
        };
        let gap = r_minus_x.dot(&(&y - result)) - lambda * (f_result - eval_unchecked(f, w, &y));
        worst = worst.min(gap);
    }
    worst
}
