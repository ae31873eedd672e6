//! Reference value of `P_F(x0)`.

use csep_core::problems::{BifunctionKind, OperatorKind};
use csep_core::{project, CsepInstance, FeasibleSet, Point};

use crate::error::{HarnessError, Result};

pub const MAX_BRUTE_FORCE_DIM: usize = 3;
/// Finest grid spacing of the zoom search.
pub const FINEST_STEP: f64 = 1e-9;

/// `P_F(x0)` from the declared solution set, or by grid search when every
/// bifunction is an affine VI over a box of dimension at most three.
pub fn reference_solution(instance: &CsepInstance) -> Result<Point> {
    match instance.known_solution() {
        Some(known) => Ok(known.project(instance.x0())),
        None => brute_force_solution(instance),
    }
}

/// `max_i |z - P_C(z - A_i z)|`, zero exactly on the common solution set.
pub fn natural_residual(instance: &CsepInstance, z: &Point) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for f in instance.bifunctions() {
        let BifunctionKind::ViInduced(op) = f.kind() else {
            return Err(HarnessError::OracleUnavailable(String::from(
                "natural residual needs VI bifunctions",
            )));
        };
        let step = z.add_scaled(-1.0, &op.apply(z));
        worst = worst.max(z.dist(&project(instance.set(), &step)?));
    }
    Ok(worst)
}

fn nodes_per_axis(dim: usize) -> usize {
    match dim {
        1 => 2001,
        2 => 201,
        _ => 41,
    }
}

/// Grid search with successive zooms.
///
/// Every node whose natural residual is below the residual's Lipschitz
/// bound times the node spacing is kept; the kept node nearest `x0` becomes
/// the center of the next, finer window. For a singleton `F` the error is of
/// the order of the final spacing; along a flat face of `F` the grid error
/// can reach the square root of it.
pub fn brute_force_solution(instance: &CsepInstance) -> Result<Point> {
    let dim = instance.dimension();
    if dim > MAX_BRUTE_FORCE_DIM {
        return Err(HarnessError::OracleUnavailable(format!(
            "dimension {dim} exceeds {MAX_BRUTE_FORCE_DIM}"
        )));
    }
    let FeasibleSet::Box { lower, upper } = instance.set() else {
        return Err(HarnessError::OracleUnavailable(String::from(
            "grid search needs a box feasible set",
        )));
    };
    let mut lipschitz: f64 = 0.0;
    for f in instance.bifunctions() {
        match f.kind() {
            BifunctionKind::ViInduced(op) if matches!(op.kind(), OperatorKind::Affine { .. }) => {
                lipschitz = lipschitz.max(op.lipschitz());
            }
            _ => {
                return Err(HarnessError::OracleUnavailable(String::from(
                    "grid search needs affine VI bifunctions",
                )))
            }
        }
    }

    let nodes = nodes_per_axis(dim);
    let mut lo = lower.clone();
    let mut hi = upper.clone();
    let mut best: Option<Point> = None;
    loop {
        let h = (0..dim)
            .map(|j| (hi[j] - lo[j]) / (nodes - 1) as f64)
            .fold(0.0, f64::max);
        let radius = 0.5 * h * (dim as f64).sqrt();
        let threshold = (2.0 + lipschitz) * radius * (1.0 + 1e-9) + 1e-12;
        let mut chosen: Option<(f64, Point)> = None;
        for idx in 0..nodes.pow(dim as u32) {
            let mut rem = idx;
            let mut z = Point::zeros(dim);
            for j in 0..dim {
                let t = (rem % nodes) as f64 / (nodes - 1) as f64;
                rem /= nodes;
                z[j] = lo[j] + t * (hi[j] - lo[j]);
            }
            if natural_residual(instance, &z)? > threshold {
                continue;
            }
            let d = z.dist(instance.x0());
            if chosen.as_ref().is_none_or(|(b, _)| d < *b) {
                chosen = Some((d, z));
            }
        }
        match chosen {
            Some((_, z)) => best = Some(z),
            None if best.is_none() => return Err(HarnessError::EmptyF),
            None => break,
        }
        if h <= FINEST_STEP {
            break;
        }
        let center = best.clone().unwrap_or_else(|| lo.clone());
        let half = 10.0 * h;
        for j in 0..dim {
            lo[j] = (center[j] - half).max(lower[j]);
            hi[j] = (center[j] + half).min(upper[j]);
        }
    }
    best.ok_or(HarnessError::EmptyF)
}

#[cfg(test)]
mod tests {
    use super::*;
    use csep_core::{Bifunction, KnownSolution, Matrix, Operator};

    fn vi(rows: &[Vec<f64>]) -> Bifunction {
        Bifunction::vi(Operator::linear(Matrix::from_rows(rows).unwrap()).unwrap())
    }

    fn flat() -> CsepInstance {
        CsepInstance::new(
            2,
            FeasibleSet::cube(2, -1.0, 1.0).unwrap(),
            vec![vi(&[vec![1.0, 0.0], vec![0.0, 0.0]])],
            Point::from_slice(&[0.5, 0.3]),
        )
        .unwrap()
    }

    #[test]
    fn analytic_slice() {
        let inst = flat()
            .with_known_solution(KnownSolution::AffineSegmentBox {
                lower: Point::from_slice(&[0.0, -1.0]),
                upper: Point::from_slice(&[0.0, 1.0]),
            })
            .unwrap();
        assert_eq!(reference_solution(&inst).unwrap(), Point::from_slice(&[0.0, 0.3]));
    }

    #[test]
    fn singleton_is_exact() {
        let inst = flat()
            .with_known_solution(KnownSolution::Singleton(Point::from_slice(&[1.0, 0.0])))
            .unwrap();
        assert_eq!(reference_solution(&inst).unwrap(), Point::from_slice(&[1.0, 0.0]));
    }

    #[test]
    fn grid_matches_slice() {
        let z = brute_force_solution(&flat()).unwrap();
        assert!(z.dist(&Point::from_slice(&[0.0, 0.3])) < 1e-6, "{z:?}");
    }

    #[test]
    fn grid_finds_common_zero() {
        let inst = CsepInstance::new(
            2,
            FeasibleSet::cube(2, -1.0, 1.0).unwrap(),
            vec![
                vi(&[vec![1.0, 0.0], vec![0.0, 0.0]]),
                vi(&[vec![0.0, 0.0], vec![1.0, 1.0]]),
            ],
            Point::from_slice(&[0.7, -0.4]),
        )
        .unwrap();
        let z = brute_force_solution(&inst).unwrap();
        assert!(z.norm() < 1e-6, "{z:?}");
    }

    #[test]
    fn empty_common_set() {
        // x1 = 0.5 for the first, x1 = -0.5 for the second.
        let shifted = |c: f64| {
            Bifunction::vi(
                Operator::affine(
                    Matrix::identity(1),
                    Point::from_slice(&[c]),
                    None,
                )
                .unwrap(),
            )
        };
        let inst = CsepInstance::new(
            1,
            FeasibleSet::cube(1, -1.0, 1.0).unwrap(),
            vec![shifted(-0.5), shifted(0.5)],
            Point::from_slice(&[0.0]),
        )
        .unwrap();
        assert!(matches!(brute_force_solution(&inst), Err(HarnessError::EmptyF)));
    }

    #[test]
    fn unavailable_cases() {
        let ball = CsepInstance::new(
            2,
            FeasibleSet::new_ball(Point::zeros(2), 1.0).unwrap(),
            vec![vi(&[vec![1.0, 0.0], vec![0.0, 1.0]])],
            Point::zeros(2),
        )
        .unwrap();
        assert!(matches!(
            reference_solution(&ball),
            Err(HarnessError::OracleUnavailable(_))
        ));
        let big = CsepInstance::new(
            4,
            FeasibleSet::cube(4, -1.0, 1.0).unwrap(),
            vec![Bifunction::vi(Operator::linear(Matrix::identity(4)).unwrap())],
            Point::zeros(4),
        )
        .unwrap();
        assert!(matches!(
            reference_solution(&big),
            Err(HarnessError::OracleUnavailable(_))
        ));
    }
}
