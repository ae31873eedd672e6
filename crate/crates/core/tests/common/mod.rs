//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use csep_core::{FeasibleSet, HalfspaceCut, Point};
use nalgebra::{DMatrix, DVector};

pub fn p(v: &[f64]) -> Point {
    Point::from_slice(v)
}

/// Projection onto `{z : <a_i, z> <= b_i}` by enumerating active sets and
/// checking KKT conditions. Returns `None` when no active set qualifies.
pub fn qp_project(normals: &[Vec<f64>], offsets: &[f64], x0: &[f64]) -> Option<Vec<f64>> {
    let d = x0.len();
    let m = normals.len();
    let x = DVector::from_column_slice(x0);
    let feasible = |z: &DVector<f64>| {
        (0..m).all(|i| DVector::from_column_slice(&normals[i]).dot(z) - offsets[i] <= 1e-9 * (1.0 + offsets[i].abs()))
    };
    if feasible(&x) {
        return Some(x0.to_vec());
    }
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 1u32..(1 << m) {
        let idx: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        if idx.len() > d {
            continue;
        }
        let a = DMatrix::from_fn(idx.len(), d, |r, c| normals[idx[r]][c]);
        let gram = &a * a.transpose();
        let rhs = DVector::from_fn(idx.len(), |r, _| normals[idx[r]].iter().zip(x0).map(|(u, v)| u * v).sum::<f64>() - offsets[idx[r]]);
        let svd = gram.clone().svd(true, true);
        if svd.singular_values.min() <= 1e-12 * svd.singular_values.max().max(1.0) {
            continue;
        }
        let Some(mu) = gram.lu().solve(&rhs) else { continue };
        if mu.iter().any(|&v| v < -1e-12) {
            continue;
        }
        let z = &x - a.transpose() * mu;
        if feasible(&z) {
            let dist = (&z - &x).norm();
            if best.as_ref().is_none_or(|(b, _)| dist < *b) {
                best = Some((dist, z));
            }
        }
    }
    best.map(|(_, z)| z.iter().copied().collect())
}

pub fn qp_project_cuts(cuts: &[HalfspaceCut], x0: &Point) -> Option<Point> {
    let normals: Vec<Vec<f64>> = cuts.iter().map(|c| c.normal().as_slice().to_vec()).collect();
    let offsets: Vec<f64> = cuts.iter().map(|c| c.offset()).collect();
    qp_project(&normals, &offsets, x0.as_slice()).map(Point::new)
}

/// Projection onto a box or ball from the textbook formulas; polyhedra go
/// through [`qp_project_cuts`].
pub fn reference_projection(set: &FeasibleSet, x: &Point) -> Point {
    match set {
        FeasibleSet::Box { lower, upper } => Point::new(
            x.as_slice()
                .iter()
                .zip(lower.as_slice().iter().zip(upper.as_slice()))
                .map(|(v, (l, u))| v.max(*l).min(*u))
                .collect(),
        ),
        FeasibleSet::Ball { center, radius } => {
            let d = x.dist(center);
            if d <= *radius {
                x.clone()
            } else {
                center.lerp(x, radius / d)
            }
        }
        FeasibleSet::Polyhedron { cuts } => qp_project_cuts(cuts, x).expect("polyhedron oracle"),
        FeasibleSet::WholeSpace => x.clone(),
    }
}
