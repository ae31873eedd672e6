//! Bifunctions, their Lipschitz-type constants and problem instances.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::error::CoreError;
use crate::geometry::FeasibleSet;
use crate::linalg::{check_dim, Matrix, Point};
use crate::sampling;

/// Constants `c1, c2` of the inequality
/// `f(x,y) + f(y,z) >= f(x,z) - c1 |x-y|^2 - c2 |y-z|^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LipschitzData {
    pub c1: f64,
    pub c2: f64,
}

impl LipschitzData {
    pub fn new(c1: f64, c2: f64) -> Result<Self, CoreError> {
        let data = LipschitzData { c1, c2 };
        data.check()?;
        Ok(data)
    }

    pub fn sum(&self) -> f64 {
        self.c1 + self.c2
    }

    /// Both constants nonnegative and finite with a positive sum.
    pub fn check(&self) -> Result<(), CoreError> {
        let ok = self.c1 >= 0.0
            && self.c2 >= 0.0
            && self.c1.is_finite()
            && self.c2.is_finite()
            && self.sum() > 0.0;
        if ok {
            Ok(())
        } else {
            Err(CoreError::UnknownConstants(format!(
                "c1 = {}, c2 = {} (need c1, c2 >= 0 and c1 + c2 > 0)",
                self.c1, self.c2
            )))
        }
    }
}

pub type OperatorFn = Arc<dyn Fn(&Point) -> Point + Send + Sync>;
pub type BifunctionFn = Arc<dyn Fn(&Point, &Point) -> f64 + Send + Sync>;
pub type SubgradientFn = Arc<dyn Fn(&Point, &Point) -> Point + Send + Sync>;

#[derive(Clone)]
pub enum OperatorKind {
    /// `A(x) = M x + q`
    Affine { m: Matrix, q: Point },
    BlackBox { eval: OperatorFn },
}

/// An operator `A` with its Lipschitz constant `L`.
#[derive(Clone)]
pub struct Operator {
    kind: OperatorKind,
    lipschitz: f64,
}

impl Operator {
    /// `L` defaults to the spectral norm of `M`.
    pub fn affine(m: Matrix, q: Point, lipschitz: Option<f64>) -> Result<Self, CoreError> {
        check_dim(m.rows(), q.dim())?;
        check_dim(m.rows(), m.cols())?;
        let lipschitz = lipschitz.unwrap_or_else(|| m.spectral_norm());
        Self::checked(OperatorKind::Affine { m, q }, lipschitz)
    }

    /// `A(x) = M x`
    pub fn linear(m: Matrix) -> Result<Self, CoreError> {
        let q = Point::zeros(m.rows());
        Self::affine(m, q, None)
    }

    pub fn black_box<F>(eval: F, lipschitz: f64) -> Result<Self, CoreError>
    where
        F: Fn(&Point) -> Point + Send + Sync + 'static,
    {
        Self::checked(
            OperatorKind::BlackBox {
                eval: Arc::new(eval),
            },
            lipschitz,
        )
    }

    fn checked(kind: OperatorKind, lipschitz: f64) -> Result<Self, CoreError> {
        if !(lipschitz > 0.0) || !lipschitz.is_finite() {
            return Err(CoreError::UnknownConstants(format!(
                "operator Lipschitz constant {lipschitz} must be positive"
            )));
        }
        Ok(Operator { kind, lipschitz })
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn apply(&self, x: &Point) -> Point {
        match &self.kind {
            OperatorKind::Affine { m, q } => &m.mul_vec(x) + q,
            OperatorKind::BlackBox { eval } => eval(x),
        }
    }

    fn dim(&self) -> Option<usize> {
        match &self.kind {
            OperatorKind::Affine { q, .. } => Some(q.dim()),
            OperatorKind::BlackBox { .. } => None,
        }
    }
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            OperatorKind::Affine { m, q } => f
                .debug_struct("Operator::Affine")
                .field("m", m)
                .field("q", q)
                .field("lipschitz", &self.lipschitz)
                .finish(),
            OperatorKind::BlackBox { .. } => f
                .debug_struct("Operator::BlackBox")
                .field("lipschitz", &self.lipschitz)
                .finish_non_exhaustive(),
        }
    }
}

#[derive(Clone)]
pub enum BifunctionKind {
    /// `f(x,y) = <A(x), y - x>`
    ViInduced(Operator),
    /// `f(x,y) = <P x + Q y + q, y - x>`
    AffineQuadratic { p: Matrix, q_mat: Matrix, q: Point },
    /// User oracle for `f` and for a subgradient of `f(x, .)` at `y`.
    BlackBox {
        eval: BifunctionFn,
        subgrad2: SubgradientFn,
    },
}

/// An equilibrium bifunction together with optional explicit constants.
#[derive(Clone)]
pub struct Bifunction {
    kind: BifunctionKind,
    constants: Option<LipschitzData>,
}

impl Bifunction {
    pub fn vi(op: Operator) -> Self {
        Bifunction {
            kind: BifunctionKind::ViInduced(op),
            constants: None,
        }
    }

    pub fn affine_quadratic(p: Matrix, q_mat: Matrix, q: Point) -> Result<Self, CoreError> {
        let d = q.dim();
        for m in [&p, &q_mat] {
            check_dim(d, m.rows())?;
            check_dim(d, m.cols())?;
        }
        Ok(Bifunction {
            kind: BifunctionKind::AffineQuadratic { p, q_mat, q },
            constants: None,
        })
    }

    pub fn black_box<F, G>(eval: F, subgrad2: G) -> Self
    where
        F: Fn(&Point, &Point) -> f64 + Send + Sync + 'static,
        G: Fn(&Point, &Point) -> Point + Send + Sync + 'static,
    {
        Bifunction {
            kind: BifunctionKind::BlackBox {
                eval: Arc::new(eval),
                subgrad2: Arc::new(subgrad2),
            },
            constants: None,
        }
    }

    /// Overrides the derived constants.
    pub fn with_constants(mut self, constants: LipschitzData) -> Self {
        self.constants = Some(constants);
        self
    }

    pub fn kind(&self) -> &BifunctionKind {
        &self.kind
    }

    pub fn explicit_constants(&self) -> Option<LipschitzData> {
        self.constants
    }

    /// Explicit constants if given, otherwise [`default_lipschitz`], checked for a positive sum.
    pub fn constants(&self) -> Result<LipschitzData, CoreError> {
        let c = match self.constants {
            Some(c) => c,
            None => default_lipschitz(self)?,
        };
        c.check()?;
        Ok(c)
    }

    pub fn is_smooth_builtin(&self) -> bool {
        !matches!(self.kind, BifunctionKind::BlackBox { .. })
    }

    fn dim(&self) -> Option<usize> {
        match &self.kind {
            BifunctionKind::ViInduced(op) => op.dim(),
            BifunctionKind::AffineQuadratic { q, .. } => Some(q.dim()),
            BifunctionKind::BlackBox { .. } => None,
        }
    }
}

impl fmt::Debug for Bifunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = f.debug_struct("Bifunction");
        match &self.kind {
            BifunctionKind::ViInduced(op) => s.field("vi", op),
            BifunctionKind::AffineQuadratic { p, q_mat, q } => {
                s.field("p", p).field("q_mat", q_mat).field("q", q)
            }
            BifunctionKind::BlackBox { .. } => s.field("black_box", &"<oracle>"),
        };
        s.field("constants", &self.constants).finish()
    }
}

fn check_pair(f: &Bifunction, x: &Point, y: &Point) -> Result<(), CoreError> {
    check_dim(x.dim(), y.dim())?;
    if let Some(d) = f.dim() {
        check_dim(d, x.dim())?;
    }
    Ok(())
}

/// The value `f(x, y)`.
pub fn eval(f: &Bifunction, x: &Point, y: &Point) -> Result<f64, CoreError> {
    check_pair(f, x, y)?;
    Ok(eval_unchecked(f, x, y))
}

pub(crate) fn eval_unchecked(f: &Bifunction, x: &Point, y: &Point) -> f64 {
    match &f.kind {
        BifunctionKind::ViInduced(op) => op.apply(x).dot(&(y - x)),
        BifunctionKind::AffineQuadratic { p, q_mat, q } => {
            let mut g = &p.mul_vec(x) + &q_mat.mul_vec(y);
            g.axpy(1.0, q);
            g.dot(&(y - x))
        }
        BifunctionKind::BlackBox { eval, .. } => eval(x, y),
    }
}

/// A subgradient of `f(x, .)` at `y`.
pub fn subgrad2(f: &Bifunction, x: &Point, y: &Point) -> Result<Point, CoreError> {
    check_pair(f, x, y)?;
    Ok(subgrad2_unchecked(f, x, y))
}

pub(crate) fn subgrad2_unchecked(f: &Bifunction, x: &Point, y: &Point) -> Point {
    match &f.kind {
        BifunctionKind::ViInduced(op) => op.apply(x),
        BifunctionKind::AffineQuadratic { p, q_mat, q } => {
            // P x + Q^T (y - x) + Q y + q
            let mut g = p.mul_vec(x);
            g.axpy(1.0, &q_mat.tr_mul_vec(&(y - x)));
            g.axpy(1.0, &q_mat.mul_vec(y));
            g.axpy(1.0, q);
            g
        }
        BifunctionKind::BlackBox { subgrad2, .. } => subgrad2(x, y),
    }
}

/// Constants derived from the structure of the built-in families.
///
/// For `<A(x), y - x>` the defect `f(x,y) + f(y,z) - f(x,z)` equals
/// `<A(y) - A(x), z - y>`, giving `c1 = c2 = L/2`. For the affine-quadratic
/// family it equals `<(Q^T - P)(y - x), y - z>`, giving
/// `c1 = c2 = |P - Q^T| / 2`.
pub fn default_lipschitz(f: &Bifunction) -> Result<LipschitzData, CoreError> {
    match &f.kind {
        BifunctionKind::ViInduced(op) => {
            let half = 0.5 * op.lipschitz();
            Ok(LipschitzData { c1: half, c2: half })
        }
        BifunctionKind::AffineQuadratic { p, q_mat, .. } => {
            let half = 0.5 * p.sub(&q_mat.transpose()).spectral_norm();
            Ok(LipschitzData { c1: half, c2: half })
        }
        BifunctionKind::BlackBox { .. } => Err(CoreError::UnknownConstants(String::from(
            "black-box bifunction needs explicit c1, c2",
        ))),
    }
}

/// Analytic description of the solution set `F`, when known.
#[derive(Clone, Debug, PartialEq)]
pub enum KnownSolution {
    Singleton(Point),
    /// `F = {z : lower <= z <= upper}` where some coordinates may be pinned
    /// (`lower[j] == upper[j]`), i.e. an axis-aligned affine slice of a box.
    AffineSegmentBox { lower: Point, upper: Point },
}

impl KnownSolution {
    pub fn dim(&self) -> usize {
        match self {
            KnownSolution::Singleton(p) => p.dim(),
            KnownSolution::AffineSegmentBox { lower, .. } => lower.dim(),
        }
    }

    /// `P_F(x)`.
    pub fn project(&self, x: &Point) -> Point {
        match self {
            KnownSolution::Singleton(p) => p.clone(),
            KnownSolution::AffineSegmentBox { lower, upper } => Point::new(
                (0..x.dim()).map(|j| x[j].clamp(lower[j], upper[j])).collect(),
            ),
        }
    }

    /// Corners-and-center sample of `F` for containment checks.
    pub fn representatives(&self) -> Vec<Point> {
        match self {
            KnownSolution::Singleton(p) => alloc::vec![p.clone()],
            KnownSolution::AffineSegmentBox { lower, upper } => {
                let mid = lower.lerp(upper, 0.5);
                let mut out = alloc::vec![lower.clone(), upper.clone(), mid];
                for j in 0..lower.dim() {
                    if lower[j] < upper[j] {
                        let mut a = lower.lerp(upper, 0.5);
                        a[j] = lower[j];
                        let mut b = a.clone();
                        b[j] = upper[j];
                        out.push(a);
                        out.push(b);
                    }
                }
                out
            }
        }
    }
}

/// A common-solution problem: `N` bifunctions on a shared feasible set.
#[derive(Clone, Debug)]
pub struct CsepInstance {
    dimension: usize,
    set: FeasibleSet,
    bifunctions: Vec<Bifunction>,
    known_solution: Option<KnownSolution>,
    x0: Point,
}

impl CsepInstance {
    pub fn new(
        dimension: usize,
        set: FeasibleSet,
        bifunctions: Vec<Bifunction>,
        x0: Point,
    ) -> Result<Self, CoreError> {
        if dimension == 0 {
            return Err(CoreError::IncompatibleInstance(String::from(
                "dimension must be positive",
            )));
        }
        if bifunctions.is_empty() {
            return Err(CoreError::IncompatibleInstance(String::from(
                "at least one bifunction is required",
            )));
        }
        set.check_dim(dimension)?;
        check_dim(dimension, x0.dim())?;
        if !x0.is_finite() {
            return Err(CoreError::NonFiniteObjective);
        }
        for f in &bifunctions {
            if let Some(d) = f.dim() {
                check_dim(dimension, d)?;
            }
        }
        Ok(CsepInstance {
            dimension,
            set,
            bifunctions,
            known_solution: None,
            x0,
        })
    }

    pub fn with_known_solution(mut self, known: KnownSolution) -> Result<Self, CoreError> {
        check_dim(self.dimension, known.dim())?;
        self.known_solution = Some(known);
        Ok(self)
    }

    pub fn with_x0(mut self, x0: Point) -> Result<Self, CoreError> {
        check_dim(self.dimension, x0.dim())?;
        self.x0 = x0;
        Ok(self)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn set(&self) -> &FeasibleSet {
        &self.set
    }

    pub fn bifunctions(&self) -> &[Bifunction] {
        &self.bifunctions
    }

    /// Number of bifunctions `N`.
    pub fn len(&self) -> usize {
        self.bifunctions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bifunctions.is_empty()
    }

    pub fn known_solution(&self) -> Option<&KnownSolution> {
        self.known_solution.as_ref()
    }

    pub fn x0(&self) -> &Point {
        &self.x0
    }

    /// Checked constants of every bifunction, in order.
    pub fn constants(&self) -> Result<Vec<LipschitzData>, CoreError> {
        self.bifunctions.iter().map(Bifunction::constants).collect()
    }
}

/// Spot-check results for one bifunction.
#[derive(Clone, Debug, PartialEq)]
pub struct BifunctionReport {
    pub index: usize,
    /// `max |f(x,x)|` over sampled `x` in `C`.
    pub max_diagonal: f64,
    pub convexity_violations: usize,
    pub pseudomonotonicity_violations: usize,
    /// Triples breaking the Lipschitz-type inequality with the resolved constants.
    pub lipschitz_type_violations: usize,
    pub worst_lipschitz_slack: f64,
    /// Max gap between `subgrad2` and central differences (built-in families only).
    pub subgradient_discrepancy: Option<f64>,
    pub constants: Option<LipschitzData>,
    pub warnings: Vec<String>,
}

impl BifunctionReport {
    pub fn violation_count(&self) -> usize {
        usize::from(self.max_diagonal > 1e-10)
            + self.convexity_violations
            + self.pseudomonotonicity_violations
            + self.lipschitz_type_violations
            + usize::from(self.subgradient_discrepancy.is_some_and(|d| d > 1e-6))
            + usize::from(self.constants.is_none())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub samples: usize,
    pub bifunctions: Vec<BifunctionReport>,
    /// Weak continuity cannot be sampled; it is assumed.
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.bifunctions.iter().all(|b| b.violation_count() == 0)
    }
}

const FD_STEP: f64 = 1e-5;

/// Sampled checks of the standing assumptions on every bifunction.
pub fn validate(instance: &CsepInstance, samples: usize, seed: u64) -> ValidationReport {
    let samples = samples.max(1);
    let set = instance.set();
    let spread = 1.0 + instance.x0().norm();
    let mut report = ValidationReport {
        samples,
        bifunctions: Vec::with_capacity(instance.len()),
        notes: alloc::vec![String::from(
            "weak continuity is assumed, not checked; only values at sampled points are examined",
        )],
    };

    for (index, f) in instance.bifunctions().iter().enumerate() {
        let mut rng = sampling::rng(seed.wrapping_add(index as u64));
        let mut draw = || sampling::in_set(&mut rng, set, instance.x0(), spread);
        let mut r = BifunctionReport {
            index,
            max_diagonal: 0.0,
            convexity_violations: 0,
            pseudomonotonicity_violations: 0,
            lipschitz_type_violations: 0,
            worst_lipschitz_slack: f64::INFINITY,
            subgradient_discrepancy: None,
            constants: None,
            warnings: Vec::new(),
        };
        match f.constants() {
            Ok(c) => r.constants = Some(c),
            Err(e) => r.warnings.push(format!("{e}")),
        }
        if let BifunctionKind::ViInduced(op) = f.kind() {
            if let OperatorKind::Affine { m, .. } = op.kind() {
                let est = m.spectral_norm();
                if op.lipschitz() < est * (1.0 - 1e-9) {
                    r.warnings.push(format!(
                        "declared L = {} is below the spectral norm estimate {est}",
                        op.lipschitz()
                    ));
                }
            }
        }

        for _ in 0..samples {
            let (Ok(x), Ok(y), Ok(z)) = (draw(), draw(), draw()) else {
                r.warnings.push(String::from("could not sample the feasible set"));
                break;
            };
            let fxx = eval_unchecked(f, &x, &x);
            r.max_diagonal = r.max_diagonal.max(fxx.abs());

            let mid = y.lerp(&z, 0.5);
            let fy = eval_unchecked(f, &x, &y);
            let fz = eval_unchecked(f, &x, &z);
            let fm = eval_unchecked(f, &x, &mid);
            if fm > 0.5 * (fy + fz) + 1e-10 * (1.0 + fy.abs() + fz.abs()) {
                r.convexity_violations += 1;
            }

            let fyx = eval_unchecked(f, &y, &x);
            if fy >= 0.0 && fyx > 1e-10 {
                r.pseudomonotonicity_violations += 1;
            }

            if let Some(c) = r.constants {
                let fxz = fz;
                let fyz = eval_unchecked(f, &y, &z);
                let slack = fy + fyz - fxz + c.c1 * x.dist_sq(&y) + c.c2 * y.dist_sq(&z);
                r.worst_lipschitz_slack = r.worst_lipschitz_slack.min(slack);
                if slack < -1e-9 {
                    r.lipschitz_type_violations += 1;
                }
            }

            if f.is_smooth_builtin() {
                let g = subgrad2_unchecked(f, &x, &y);
                let mut worst: f64 = 0.0;
                for j in 0..y.dim() {
                    let mut yp = y.clone();
                    let mut ym = y.clone();
                    yp[j] += FD_STEP;
                    ym[j] -= FD_STEP;
                    let fd = (eval_unchecked(f, &x, &yp) - eval_unchecked(f, &x, &ym))
                        / (2.0 * FD_STEP);
                    worst = worst.max((fd - g[j]).abs());
                }
                let prev = r.subgradient_discrepancy.unwrap_or(0.0);
                r.subgradient_discrepancy = Some(prev.max(worst));
            }
        }
        report.bifunctions.push(r);
    }
    report
}
