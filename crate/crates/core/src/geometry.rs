//! Feasible sets, halfspace cuts and metric projections.
//!
//! Every projection here is a pure function of its arguments. The closed
//! forms cover boxes, balls, single halfspaces and pairs of halfspaces; the
//! general polyhedral case runs Dykstra's alternating method followed by an
//! exact solve on the identified active set.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::CoreError;
use crate::linalg::{check_dim, Matrix, Point};

/// Normals shorter than this are treated as zero.
pub const DEGENERACY_THRESHOLD: f64 = 1e-14;
/// A zero-normal cut `0 <= b` is the whole space when `b` is at least `-DEGENERATE_OFFSET_TOL`.
pub const DEGENERATE_OFFSET_TOL: f64 = 1e-12;
pub const DEFAULT_INTERSECTION_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_CYCLES: usize = 10_000;

/// The halfspace `{z : <normal, z> <= offset}`.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfspaceCut {
    normal: Point,
    offset: f64,
    degenerate: bool,
}

impl HalfspaceCut {
    /// Fails with [`CoreError::DegenerateCut`] when the normal vanishes and the
    /// offset is negative, i.e. the cut would describe the empty set.
    pub fn new(normal: Point, offset: f64) -> Result<Self, CoreError> {
        let degenerate = normal.norm() < DEGENERACY_THRESHOLD;
        if degenerate && offset < -DEGENERATE_OFFSET_TOL {
            return Err(CoreError::DegenerateCut { offset });
        }
        Ok(HalfspaceCut {
            normal,
            offset,
            degenerate,
        })
    }

    pub fn whole_space(dim: usize) -> Self {
        HalfspaceCut {
            normal: Point::zeros(dim),
            offset: 0.0,
            degenerate: true,
        }
    }

    pub fn normal(&self) -> &Point {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn dim(&self) -> usize {
        self.normal.dim()
    }

    /// True when the cut carries no constraint.
    /// The same halfspace with a unit normal; degenerate cuts are returned as is.
    pub fn normalized(&self) -> HalfspaceCut {
        if self.degenerate {
            return self.clone();
        }
        let norm = self.normal.norm();
        HalfspaceCut {
            normal: self.normal.scaled(1.0 / norm),
            offset: self.offset / norm,
            degenerate: false,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Signed value `<a, x> - b`; positive means violated.
    pub fn violation(&self, x: &Point) -> f64 {
        if self.degenerate {
            return -self.offset;
        }
        self.normal.dot(x) - self.offset
    }

    /// Euclidean distance from `x` to the halfspace (zero inside).
    pub fn distance(&self, x: &Point) -> f64 {
        if self.degenerate {
            return 0.0;
        }
        f64::max(self.violation(x), 0.0) / self.normal.norm()
    }

    pub fn contains(&self, x: &Point, tol: f64) -> bool {
        self.distance(x) <= tol
    }
}

/// The closed convex set `C`.
#[derive(Clone, Debug, PartialEq)]
pub enum FeasibleSet {
    Box { lower: Point, upper: Point },
    Ball { center: Point, radius: f64 },
    Polyhedron { cuts: Vec<HalfspaceCut> },
    WholeSpace,
}

impl FeasibleSet {
    pub fn new_box(lower: Point, upper: Point) -> Result<Self, CoreError> {
        check_dim(lower.dim(), upper.dim())?;
        if let Some(j) = (0..lower.dim()).find(|&j| !(lower[j] <= upper[j])) {
            return Err(CoreError::InvalidSet(format!(
                "box lower bound exceeds upper bound in coordinate {j}"
            )));
        }
        Ok(FeasibleSet::Box { lower, upper })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self, CoreError> {
        Self::new_box(Point::new(vec![lo; dim]), Point::new(vec![hi; dim]))
    }

    pub fn new_ball(center: Point, radius: f64) -> Result<Self, CoreError> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(CoreError::InvalidSet(format!("ball radius {radius} must be positive")));
        }
        Ok(FeasibleSet::Ball { center, radius })
    }

    pub fn polyhedron(cuts: Vec<HalfspaceCut>) -> Self {
        FeasibleSet::Polyhedron { cuts }
    }

    /// Dimension fixed by the set, if any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            FeasibleSet::Box { lower, .. } => Some(lower.dim()),
            FeasibleSet::Ball { center, .. } => Some(center.dim()),
            FeasibleSet::Polyhedron { cuts } => cuts.first().map(HalfspaceCut::dim),
            FeasibleSet::WholeSpace => None,
        }
    }

    pub fn check_dim(&self, dim: usize) -> Result<(), CoreError> {
        match self.dim() {
            Some(d) => check_dim(d, dim),
            None => Ok(()),
        }
    }

    /// Distance-like membership residual: zero inside the set.
    pub fn violation(&self, x: &Point) -> f64 {
        match self {
            FeasibleSet::Box { lower, upper } => (0..x.dim())
                .map(|j| f64::max(lower[j] - x[j], x[j] - upper[j]))
                .fold(0.0, f64::max),
            FeasibleSet::Ball { center, radius } => f64::max(x.dist(center) - radius, 0.0),
            FeasibleSet::Polyhedron { cuts } => {
                cuts.iter().map(|c| c.distance(x)).fold(0.0, f64::max)
            }
            FeasibleSet::WholeSpace => 0.0,
        }
    }

    pub fn contains(&self, x: &Point, tol: f64) -> bool {
        self.violation(x) <= tol
    }

    /// Halfspace description of a polyhedral set; `None` for balls.
    /// Infinite box bounds are dropped.
    pub fn halfspaces(&self) -> Option<Vec<HalfspaceCut>> {
        match self {
            FeasibleSet::Box { lower, upper } => {
                let d = lower.dim();
                let mut cuts = Vec::with_capacity(2 * d);
                for j in 0..d {
                    let mut e = Point::zeros(d);
                    e[j] = 1.0;
                    if upper[j].is_finite() {
                        cuts.push(HalfspaceCut { normal: e.clone(), offset: upper[j], degenerate: false });
                    }
                    if lower[j].is_finite() {
                        cuts.push(HalfspaceCut { normal: e.scaled(-1.0), offset: -lower[j], degenerate: false });
                    }
                }
                Some(cuts)
            }
            FeasibleSet::Ball { .. } => None,
            FeasibleSet::Polyhedron { cuts } => Some(cuts.clone()),
            FeasibleSet::WholeSpace => Some(Vec::new()),
        }
    }
}

/// Metric projection of `x` onto `set`.
pub fn project(set: &FeasibleSet, x: &Point) -> Result<Point, CoreError> {
    set.check_dim(x.dim())?;
    match set {
        FeasibleSet::Box { lower, upper } => Ok(Point::new(
            (0..x.dim()).map(|j| x[j].clamp(lower[j], upper[j])).collect(),
        )),
        FeasibleSet::Ball { center, radius } => {
            let offset = x - center;
            let r = offset.norm();
            if r <= *radius {
                Ok(x.clone())
            } else {
                Ok(center.add_scaled(radius / r, &offset))
            }
        }
        FeasibleSet::Polyhedron { cuts } => {
            match project_halfspace_intersection(cuts, x, DEFAULT_INTERSECTION_TOL) {
                Err(CoreError::EmptyIntersection) => Err(CoreError::InfeasibleSet),
                // A stalled projector with a large residual means the cuts do not meet.
                Err(CoreError::MaxInnerIterationsExceeded { residual, .. }) if residual > 1e-6 => {
                    Err(CoreError::InfeasibleSet)
                }
                other => other,
            }
        }
        FeasibleSet::WholeSpace => Ok(x.clone()),
    }
}

/// Projection onto a single halfspace.
pub fn project_halfspace(cut: &HalfspaceCut, x: &Point) -> Result<Point, CoreError> {
    check_dim(cut.dim(), x.dim())?;
    if cut.is_degenerate() {
        if cut.offset < -DEGENERATE_OFFSET_TOL {
            return Err(CoreError::DegenerateCut { offset: cut.offset });
        }
        return Ok(x.clone());
    }
    let v = cut.violation(x);
    if v <= 0.0 {
        return Ok(x.clone());
    }
    Ok(x.add_scaled(-v / cut.normal.norm_sq(), &cut.normal))
}

/// Relative slack used when deciding whether a closed-form candidate is feasible.
fn feasible_slack(cut: &HalfspaceCut, z: &Point) -> f64 {
    1e-12 * (1.0 + cut.offset.abs() + cut.normal.norm() * z.norm())
}

/// Exact projection of `x0` onto the intersection of two halfspaces.
pub fn project_two_halfspaces(
    c1: &HalfspaceCut,
    c2: &HalfspaceCut,
    x0: &Point,
) -> Result<Point, CoreError> {
    check_dim(c1.dim(), x0.dim())?;
    check_dim(c2.dim(), x0.dim())?;
    match (c1.is_degenerate(), c2.is_degenerate()) {
        (true, true) => return Ok(x0.clone()),
        (true, false) => return project_halfspace(c2, x0),
        (false, true) => return project_halfspace(c1, x0),
        (false, false) => {}
    }

    let v1 = c1.violation(x0);
    let v2 = c2.violation(x0);
    if v1 <= 0.0 && v2 <= 0.0 {
        return Ok(x0.clone());
    }

    // One active constraint: the single-halfspace projection solves the
    // problem whenever it also satisfies the other cut.
    let mut candidates: [Option<Point>; 2] = [None, None];
    if v1 > 0.0 {
        let p1 = x0.add_scaled(-v1 / c1.normal.norm_sq(), &c1.normal);
        if c2.violation(&p1) <= feasible_slack(c2, &p1) {
            return Ok(p1);
        }
        candidates[0] = Some(p1);
    }
    if v2 > 0.0 {
        let p2 = x0.add_scaled(-v2 / c2.normal.norm_sq(), &c2.normal);
        if c1.violation(&p2) <= feasible_slack(c1, &p2) {
            return Ok(p2);
        }
        candidates[1] = Some(p2);
    }

    // Both active: x = x0 - mu1 a1 - mu2 a2 with G mu = (v1, v2), mu >= 0.
    let g11 = c1.normal.norm_sq();
    let g22 = c2.normal.norm_sq();
    let g12 = c1.normal.dot(&c2.normal);
    let det = g11 * g22 - g12 * g12;
    if det <= 1e-14 * g11 * g22 {
        // Parallel normals: either one cut is redundant (already handled up to
        // rounding) or the intersection is empty.
        let best = candidates
            .into_iter()
            .flatten()
            .map(|p| {
                let worst = f64::max(c1.distance(&p), c2.distance(&p));
                (worst, p)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0));
        return match best {
            Some((worst, p)) if worst <= 1e-9 * (1.0 + x0.norm()) => Ok(p),
            _ => Err(CoreError::EmptyIntersection),
        };
    }
    let mu1 = (g22 * v1 - g12 * v2) / det;
    let mu2 = (g11 * v2 - g12 * v1) / det;
    if mu1 < 0.0 || mu2 < 0.0 {
        return Err(CoreError::EmptyIntersection);
    }
    let mut z = x0.add_scaled(-mu1, &c1.normal);
    z.axpy(-mu2, &c2.normal);
    Ok(z)
}

/// Projection of `x0` onto the intersection of finitely many halfspaces.
///
/// Degenerate whole-space cuts are skipped. One or two active cuts use the
/// closed forms. Up to [`MAX_ENUMERATED_CUTS`] cuts are solved exactly by
/// searching for an active set whose KKT point is feasible with nonnegative
/// multipliers. Longer lists, or a failed search, run Dykstra's method until
/// the cycle displacement and every constraint distance fall below `tol`,
/// then polish the result on the active set Dykstra identified.
pub fn project_halfspace_intersection(
    cuts: &[HalfspaceCut],
    x0: &Point,
    tol: f64,
) -> Result<Point, CoreError> {
    project_halfspace_intersection_with_cap(cuts, x0, tol, DEFAULT_MAX_CYCLES)
}

pub fn project_halfspace_intersection_with_cap(
    cuts: &[HalfspaceCut],
    x0: &Point,
    tol: f64,
    max_cycles: usize,
) -> Result<Point, CoreError> {
    for c in cuts {
        check_dim(c.dim(), x0.dim())?;
        if c.is_degenerate() && c.offset < -DEGENERATE_OFFSET_TOL {
            return Err(CoreError::DegenerateCut { offset: c.offset });
        }
    }
    let active: Vec<&HalfspaceCut> = cuts.iter().filter(|c| !c.is_degenerate()).collect();
    if active.iter().all(|c| c.violation(x0) <= 0.0) {
        return Ok(x0.clone());
    }
    match active.as_slice() {
        [c] => return project_halfspace(c, x0),
        [a, b] => return project_two_halfspaces(a, b, x0),
        _ => {}
    }
    // Unit normals keep the Gram systems below well scaled; the set is unchanged.
    let unit: Vec<HalfspaceCut> = active.iter().map(|c| c.normalized()).collect();
    let active: Vec<&HalfspaceCut> = unit.iter().collect();

    if let Some(z) = exact_by_enumeration(&active, x0) {
        return Ok(z);
    }
    let pieces: Vec<Piece<'_>> = active.iter().map(|c| Piece::Cut(c)).collect();
    let run = dykstra(&pieces, x0, tol, max_cycles)?;
    match polish_active_set(&active, x0, &run) {
        Some(z) => Ok(z),
        None if run.converged => Ok(run.point),
        None => Err(CoreError::MaxInnerIterationsExceeded {
            iterations: max_cycles,
            residual: run.residual,
        }),
    }
}

/// Multipliers above `-MULTIPLIER_SLACK` count as nonnegative (unit normals).
const MULTIPLIER_SLACK: f64 = 1e-13;

/// Largest cut count for which [`exact_by_enumeration`] is attempted.
pub const MAX_ENUMERATED_CUTS: usize = 12;

/// Exact projection through the KKT conditions, trying candidate active sets
/// in order of size. `None` when there are too many cuts or no candidate
/// passes the checks.
fn exact_by_enumeration(cuts: &[&HalfspaceCut], x0: &Point) -> Option<Point> {
    let m = cuts.len();
    if m > MAX_ENUMERATED_CUTS {
        return None;
    }
    let mut masks: Vec<u32> = (1..(1u32 << m)).collect();
    masks.sort_by_key(|s| s.count_ones());
    masks
        .into_iter()
        .find_map(|mask| {
            let act: Vec<&HalfspaceCut> = (0..m).filter(|i| mask & (1 << i) != 0).map(|i| cuts[i]).collect();
            kkt_point(&act, cuts, x0)
        })
}

/// Solves the equality-constrained projection on `act` and returns it if the
/// multipliers are nonnegative and every cut in `all` holds.
fn kkt_point(act: &[&HalfspaceCut], all: &[&HalfspaceCut], x0: &Point) -> Option<Point> {
    let m = act.len();
    let mut gram = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            gram[(i, j)] = act[i].normal.dot(&act[j].normal);
        }
    }
    let rhs = Point::new(act.iter().map(|c| c.violation(x0)).collect());
    let mu = gram.solve(&rhs).ok()?;
    if mu.as_slice().iter().any(|&m| m < -MULTIPLIER_SLACK || !m.is_finite()) {
        return None;
    }
    let mut z = x0.clone();
    for (c, m) in act.iter().zip(mu.as_slice()) {
        z.axpy(-m, &c.normal);
    }
    all.iter().all(|c| c.violation(&z) <= feasible_slack(c, &z)).then_some(z)
}

/// One convex piece of an intersection handled by [`project_onto_intersection`].
#[derive(Clone, Copy, Debug)]
pub enum Piece<'a> {
    Set(&'a FeasibleSet),
    Cut(&'a HalfspaceCut),
}

impl Piece<'_> {
    fn project(&self, x: &Point) -> Result<Point, CoreError> {
        match self {
            Piece::Set(s) => project(s, x),
            Piece::Cut(c) => project_halfspace(c, x),
        }
    }

    fn distance(&self, x: &Point) -> f64 {
        match self {
            Piece::Set(s) => s.violation(x),
            Piece::Cut(c) => c.distance(x),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DykstraRun {
    pub point: Point,
    pub cycles: usize,
    /// Number of projections onto `Piece::Set` pieces.
    pub set_projections: usize,
    /// Both stopping tests passed before the cycle cap.
    pub converged: bool,
    /// Largest piece distance after the last cycle.
    pub residual: f64,
    increments: Vec<Point>,
}

/// Dykstra's alternating projections onto a mixed list of sets and cuts.
///
/// Fails with `MaxInnerIterationsExceeded` when the cap is reached.
pub fn project_onto_intersection(
    pieces: &[Piece<'_>],
    x0: &Point,
    tol: f64,
    max_cycles: usize,
) -> Result<DykstraRun, CoreError> {
    let run = dykstra(pieces, x0, tol, max_cycles)?;
    if !run.converged {
        return Err(CoreError::MaxInnerIterationsExceeded {
            iterations: max_cycles,
            residual: run.residual,
        });
    }
    Ok(run)
}

/// Like [`project_onto_intersection`], but returns the last iterate when the cap is reached.
pub fn dykstra_attempt(
    pieces: &[Piece<'_>],
    x0: &Point,
    tol: f64,
    max_cycles: usize,
) -> Result<DykstraRun, CoreError> {
    dykstra(pieces, x0, tol, max_cycles)
}

fn dykstra(
    pieces: &[Piece<'_>],
    x0: &Point,
    tol: f64,
    max_cycles: usize,
) -> Result<DykstraRun, CoreError> {
    let mut x = x0.clone();
    let mut increments = vec![Point::zeros(x0.dim()); pieces.len()];
    let mut set_projections = 0;
    let mut residual = f64::INFINITY;
    for cycle in 1..=max_cycles {
        let start = x.clone();
        for (piece, p) in pieces.iter().zip(increments.iter_mut()) {
            let y = &x + p;
            let next = piece.project(&y)?;
            if matches!(piece, Piece::Set(_)) {
                set_projections += 1;
            }
            *p = &y - &next;
            x = next;
        }
        if !x.is_finite() {
            return Err(CoreError::NonFiniteObjective);
        }
        let displacement = x.dist(&start);
        residual = pieces.iter().map(|pc| pc.distance(&x)).fold(0.0, f64::max);
        if displacement <= tol && residual <= tol {
            return Ok(DykstraRun {
                point: x,
                cycles: cycle,
                set_projections,
                converged: true,
                residual,
                increments,
            });
        }
    }
    Ok(DykstraRun {
        point: x,
        cycles: max_cycles,
        set_projections,
        converged: false,
        residual,
        increments,
    })
}

/// Re-solves the projection exactly on the cuts whose Dykstra increments are
/// nonzero. Returns `None` if the active-set solution fails its KKT checks.
fn polish_active_set(cuts: &[&HalfspaceCut], x0: &Point, run: &DykstraRun) -> Option<Point> {
    let scale = 1e-10 * (1.0 + x0.dist(&run.point));
    let act: Vec<&HalfspaceCut> = cuts
        .iter()
        .zip(&run.increments)
        .filter(|(_, p)| p.norm() > scale)
        .map(|(c, _)| *c)
        .collect();
    if act.is_empty() {
        return None;
    }
    let z = kkt_point(&act, cuts, x0)?;
    (z.dist(&run.point) <= 1e-6 * (1.0 + x0.norm())).then_some(z)
}
