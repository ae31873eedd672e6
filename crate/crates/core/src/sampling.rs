//! Seeded sampling of points in feasible sets, used by the validators and certificates.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::CoreError;
use crate::geometry::{project, FeasibleSet};
use crate::linalg::Point;

pub type SampleRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform point of the cube `center + [-half_width, half_width]^d`.
pub fn in_cube<R: Rng>(rng: &mut R, center: &Point, half_width: f64) -> Point {
    Point::new(
        center
            .as_slice()
            .iter()
            .map(|c| c + half_width * rng.gen_range(-1.0..=1.0))
            .collect(),
    )
}

/// A point of `set`. Boxes and balls are sampled uniformly; unbounded or
/// polyhedral sets are sampled by projecting a cube sample around `hint`.
pub fn in_set<R: Rng>(
    rng: &mut R,
    set: &FeasibleSet,
    hint: &Point,
    spread: f64,
) -> Result<Point, CoreError> {
    match set {
        FeasibleSet::Box { lower, upper } => Ok(Point::new(
            (0..lower.dim())
                .map(|j| {
                    if lower[j] == upper[j] {
                        lower[j]
                    } else if lower[j].is_finite() && upper[j].is_finite() {
                        rng.gen_range(lower[j]..=upper[j])
                    } else {
                        (hint[j] + spread * rng.gen_range(-1.0..=1.0)).clamp(lower[j], upper[j])
                    }
                })
                .collect(),
        )),
        FeasibleSet::Ball { center, radius } => {
            let d = center.dim();
            // Rejection from the enclosing cube is fine at desk dimensions.
            if d <= 6 {
                loop {
                    let z = in_cube(rng, &Point::zeros(d), 1.0);
                    if z.norm_sq() <= 1.0 {
                        return Ok(center.add_scaled(*radius, &z));
                    }
                }
            }
            let dir = in_cube(rng, &Point::zeros(d), 1.0);
            let n = dir.norm().max(f64::MIN_POSITIVE);
            let r = radius * libm::pow(rng.gen_range(0.0..=1.0), 1.0 / d as f64);
            Ok(center.add_scaled(r / n, &dir))
        }
        FeasibleSet::Polyhedron { .. } | FeasibleSet::WholeSpace => {
            project(set, &in_cube(rng, hint, spread))
        }
    }
}
