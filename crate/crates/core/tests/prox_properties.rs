mod common;

use common::{p, reference_projection};
use csep_core::prox::{prox_objective, solve_prox_with, ProxMethod};
use csep_core::{
    certify_prox, project, solve_prox, Bifunction, FeasibleSet, Matrix, Operator, Point,
};
use proptest::prelude::*;

fn pt(d: usize, r: f64) -> impl Strategy<Value = Point> {
    prop::collection::vec(-r..r, d).prop_map(Point::new)
}

fn matrix(d: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-2.0..2.0f64, d * d).prop_map(move |v| {
        let rows: Vec<Vec<f64>> = v.chunks(d).map(<[f64]>::to_vec).collect();
        Matrix::from_rows(&rows).unwrap()
    })
}

/// Symmetric part of the result is `B^T B / 2`, so `f(w, .)` stays convex.
fn convex_q(d: usize) -> impl Strategy<Value = Matrix> {
    (matrix(d), matrix(d)).prop_map(|(b, s)| {
        b.transpose()
            .mul_matrix(&b)
            .scaled(0.5)
            .add(&s.sub(&s.transpose()).scaled(0.5))
    })
}

trait MulMatrix {
    fn mul_matrix(&self, other: &Matrix) -> Matrix;
}

impl MulMatrix for Matrix {
    fn mul_matrix(&self, other: &Matrix) -> Matrix {
        let rows: Vec<Vec<f64>> = (0..self.rows())
            .map(|i| {
                (0..other.cols())
                    .map(|j| (0..self.cols()).map(|k| self.row(i)[k] * other.row(k)[j]).sum())
                    .collect()
            })
            .collect();
        Matrix::from_rows(&rows).unwrap()
    }
}

fn sets(d: usize) -> impl Strategy<Value = FeasibleSet> {
    prop_oneof![
        Just(FeasibleSet::cube(d, -1.0, 1.0).unwrap()),
        (pt(d, 0.5), 0.5..2.0f64).prop_map(|(c, r)| FeasibleSet::new_ball(c, r).unwrap()),
        Just(FeasibleSet::WholeSpace),
    ]
}

/// Grid search over `[-R, R]^d` followed by successive zooms around the best node.
fn grid_minimize(d: usize, objective: impl Fn(&Point) -> f64, feasible: impl Fn(&Point) -> bool) -> Point {
    let mut center = Point::zeros(d);
    let mut half = 3.0;
    let nodes: usize = if d == 1 { 2001 } else { 81 };
    for _ in 0..12 {
        let mut best: Option<(f64, Point)> = None;
        let total = nodes.pow(d as u32);
        for idx in 0..total {
            let mut rem = idx;
            let mut y = center.clone();
            for j in 0..d {
                let k = rem % nodes;
                rem /= nodes;
                y[j] += -half + 2.0 * half * k as f64 / (nodes - 1) as f64;
            }
            if !feasible(&y) {
                continue;
            }
            let v = objective(&y);
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, y));
            }
        }
        center = best.expect("grid hits the set").1;
        half *= 4.0 / (nodes - 1) as f64;
    }
    center
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn vi_fast_path_is_projected_step(
        (m, w, x, set) in (1usize..=4).prop_flat_map(|d| (matrix(d), pt(d, 2.0), pt(d, 2.0), sets(d))),
        lambda in 0.01..1.0f64,
    ) {
        let op = Operator::linear(m).unwrap();
        let f = Bifunction::vi(op.clone());
        let r = solve_prox(&f, &w, &x, lambda, &set, 1e-12).unwrap();
        let expected = reference_projection(&set, &x.add_scaled(-lambda, &op.apply(&w)));
        prop_assert!(r.minimizer.dist(&expected) <= 1e-12 * (1.0 + expected.norm()));
        let gap = certify_prox(&f, &w, &x, lambda, &set, &r.minimizer, 200, 11);
        prop_assert!(gap >= -1e-10, "gap {}", gap);
    }

    #[test]
    fn vi_fallback_agrees_with_fast_path(
        (m, w, x) in (1usize..=3).prop_flat_map(|d| (matrix(d), pt(d, 2.0), pt(d, 2.0))),
        lambda in 0.01..0.5f64,
    ) {
        let set = FeasibleSet::cube(w.dim(), -1.0, 1.0).unwrap();
        let f = Bifunction::vi(Operator::linear(m).unwrap());
        let fast = solve_prox(&f, &w, &x, lambda, &set, 1e-12).unwrap();
        let slow = solve_prox_with(&f, &w, &x, lambda, &set, 1e-9, ProxMethod::Subgradient).unwrap();
        prop_assert!(fast.minimizer.dist(&slow.minimizer) <= 1e-6, "{:?} vs {:?}", fast.minimizer, slow.minimizer);
    }

    #[test]
    fn affine_quadratic_minimizer_beats_projection(
        (pm, qm, q, w, x, set) in (1usize..=4).prop_flat_map(|d| (matrix(d), convex_q(d), pt(d, 1.0), pt(d, 1.0), pt(d, 2.0), sets(d))),
        lambda in 0.01..1.0f64,
    ) {
        let f = Bifunction::affine_quadratic(pm, qm, q).unwrap();
        let r = solve_prox(&f, &w, &x, lambda, &set, 1e-10).unwrap();
        prop_assert!(r.converged);
        prop_assert!(set.contains(&r.minimizer, 1e-10));
        let naive = project(&set, &x).unwrap();
        let at_min = prox_objective(&f, &w, &x, lambda, &r.minimizer);
        prop_assert!(at_min <= prox_objective(&f, &w, &x, lambda, &naive) + 1e-10);
        let gap = certify_prox(&f, &w, &x, lambda, &set, &r.minimizer, 200, 5);
        prop_assert!(gap >= -1e-6, "gap {}", gap);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn affine_quadratic_matches_grid_oracle(
        (pm, qm, q, w, x) in (1usize..=2).prop_flat_map(|d| (matrix(d), convex_q(d), pt(d, 1.0), pt(d, 1.0), pt(d, 2.0))),
        lambda in 0.05..1.0f64,
    ) {
        let d = w.dim();
        let set = FeasibleSet::cube(d, -1.0, 1.0).unwrap();
        let f = Bifunction::affine_quadratic(pm, qm, q).unwrap();
        let r = solve_prox(&f, &w, &x, lambda, &set, 1e-10).unwrap();
        let oracle = grid_minimize(d, |y| prox_objective(&f, &w, &x, lambda, y), |y| set.contains(y, 0.0));
        prop_assert!(r.minimizer.dist(&oracle) <= 1e-5, "{:?} vs {:?}", r.minimizer, oracle);
    }
}

#[test]
fn vi_example() {
    let f = Bifunction::vi(Operator::linear(Matrix::identity(2)).unwrap());
    let set = FeasibleSet::cube(2, -1.0, 1.0).unwrap();
    let x = p(&[1.0, 0.0]);
    let r = solve_prox(&f, &x, &x, 0.2, &set, 1e-12).unwrap();
    assert!(r.minimizer.dist(&p(&[0.8, 0.0])) < 1e-15);
}

#[test]
fn zero_bifunction_projects() {
    let f = Bifunction::vi(Operator::affine(Matrix::zeros(2, 2), Point::zeros(2), Some(1.0)).unwrap());
    let set = FeasibleSet::new_ball(Point::zeros(2), 1.0).unwrap();
    let x = p(&[3.0, 4.0]);
    for lambda in [0.01, 1.0, 100.0] {
        let r = solve_prox(&f, &p(&[9.0, 9.0]), &x, lambda, &set, 1e-12).unwrap();
        assert!(r.minimizer.dist(&p(&[0.6, 0.8])) < 1e-15);
    }
}

#[test]
fn one_dimensional_calculus_case() {
    // f(w, y) = y (y - w) with w = x = 1, lambda = 0.5: stationarity 2y - 1.5 = 0.
    let f = Bifunction::affine_quadratic(Matrix::zeros(1, 1), Matrix::identity(1), Point::zeros(1)).unwrap();
    let x = p(&[1.0]);
    let r = solve_prox(&f, &x, &x, 0.5, &FeasibleSet::WholeSpace, 1e-12).unwrap();
    assert!((r.minimizer[0] - 0.75).abs() < 1e-12, "{:?}", r.minimizer);
    let grid = grid_minimize(1, |y| prox_objective(&f, &x, &x, 0.5, y), |_| true);
    assert!((grid[0] - 0.75).abs() < 1e-6);
    // Other anchors move the minimizer to (1 + w / 2) / 2.
    for w in [-4.0, 0.0, 7.5] {
        let w = p(&[w]);
        let r = solve_prox(&f, &w, &x, 0.5, &FeasibleSet::WholeSpace, 1e-12).unwrap();
        assert!((r.minimizer[0] - (1.0 + w[0] / 2.0) / 2.0).abs() < 1e-12);
    }
}

#[test]
fn certificate_is_zero_for_interior_fixed_point() {
    let f = Bifunction::vi(Operator::affine(Matrix::zeros(2, 2), Point::zeros(2), Some(1.0)).unwrap());
    let set = FeasibleSet::cube(2, -1.0, 1.0).unwrap();
    let x = p(&[0.2, -0.1]);
    assert_eq!(certify_prox(&f, &x, &x, 0.3, &set, &x, 200, 1), 0.0);
}

#[test]
fn certificate_detects_perturbation() {
    let f = Bifunction::vi(Operator::linear(Matrix::identity(2)).unwrap());
    let set = FeasibleSet::cube(2, -1.0, 1.0).unwrap();
    let x = p(&[0.5, 0.3]);
    let exact = solve_prox(&f, &x, &x, 0.4, &set, 1e-12).unwrap().minimizer;
    let mut bad = exact.clone();
    bad[0] += 0.1;
    assert!(certify_prox(&f, &x, &x, 0.4, &set, &bad, 200, 2) < 0.0);
}
