mod common;

use common::{p, qp_project_cuts, reference_projection};
use csep_core::geometry::{project_onto_intersection, Piece};
use csep_core::{
    project, project_halfspace, project_halfspace_intersection, project_two_halfspaces, CoreError,
    FeasibleSet, HalfspaceCut, Point,
};
use proptest::prelude::*;

const SLACK: f64 = 1e-10;

fn coords(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, dim)
}

fn unit_normal(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    coords(dim).prop_filter("nonzero normal", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-2)
}

/// Random halfspaces that all contain `anchor`.
fn cuts_through(dim: usize, count: usize) -> impl Strategy<Value = (Vec<HalfspaceCut>, Point)> {
    (
        coords(dim),
        prop::collection::vec((unit_normal(dim), 0.0..2.0f64), count),
    )
        .prop_map(|(anchor, raw)| {
            let anchor = Point::new(anchor);
            let cuts = raw
                .into_iter()
                .map(|(a, slack)| {
                    let a = Point::new(a);
                    let b = a.dot(&anchor) + slack;
                    HalfspaceCut::new(a, b).unwrap()
                })
                .collect();
            (cuts, anchor)
        })
}

fn any_set(dim: usize) -> impl Strategy<Value = FeasibleSet> {
    prop_oneof![
        (coords(dim), prop::collection::vec(0.0..3.0f64, dim)).prop_map(|(lo, w)| {
            let upper: Vec<f64> = lo.iter().zip(&w).map(|(l, w)| l + w).collect();
            FeasibleSet::new_box(Point::new(lo), Point::new(upper)).unwrap()
        }),
        (coords(dim), 0.1..4.0f64)
            .prop_map(|(c, r)| FeasibleSet::new_ball(Point::new(c), r).unwrap()),
        cuts_through(dim, 4).prop_map(|(cuts, _)| FeasibleSet::polyhedron(cuts)),
        Just(FeasibleSet::WholeSpace),
    ]
}

fn set_and_points() -> impl Strategy<Value = (FeasibleSet, Point, Point)> {
    (1usize..=4).prop_flat_map(|d| {
        (any_set(d), coords(d), coords(d)).prop_map(|(s, x, y)| (s, Point::new(x), Point::new(y)))
    })
}

proptest! {
    #[test]
    fn matches_reference_formulas((set, x, _y) in set_and_points()) {
        let z = project(&set, &x).unwrap();
        let r = reference_projection(&set, &x);
        prop_assert!(z.dist(&r) <= 1e-8, "{:?} vs {:?}", z, r);
    }

    #[test]
    fn firmly_nonexpansive((set, x, y) in set_and_points()) {
        let px = project(&set, &x).unwrap();
        let py = project(&set, &y).unwrap();
        let d = &px - &py;
        prop_assert!(d.norm_sq() <= d.dot(&(&x - &y)) + SLACK);
    }

    #[test]
    fn variational_characterization((set, x, y) in set_and_points()) {
        let px = project(&set, &x).unwrap();
        let z = project(&set, &y).unwrap();
        prop_assert!((&x - &px).dot(&(&z - &px)) <= SLACK * (1.0 + x.norm_sq() + y.norm_sq()));
    }

    #[test]
    fn pythagorean_inequality((set, x, y) in set_and_points()) {
        let px = project(&set, &x).unwrap();
        let z = project(&set, &y).unwrap();
        let lhs = x.dist_sq(&px) + px.dist_sq(&z);
        prop_assert!(lhs <= x.dist_sq(&z) + SLACK * (1.0 + x.norm_sq() + y.norm_sq()));
    }

    #[test]
    fn idempotent((set, x, _y) in set_and_points()) {
        let px = project(&set, &x).unwrap();
        let ppx = project(&set, &px).unwrap();
        prop_assert!(px.dist(&ppx) <= 1e-9);
    }

    #[test]
    fn halfspace_projection_lands_on_boundary(a in unit_normal(3), b in -3.0..3.0f64, x in coords(3)) {
        let cut = HalfspaceCut::new(Point::new(a), b).unwrap();
        let x = Point::new(x);
        let z = project_halfspace(&cut, &x).unwrap();
        prop_assert!(cut.violation(&z) <= 1e-12 * (1.0 + b.abs() + x.norm() * cut.normal().norm()));
        if cut.violation(&x) > 0.0 {
            prop_assert!(cut.violation(&z).abs() <= 1e-10);
        } else {
            prop_assert_eq!(z, x);
        }
    }

    #[test]
    fn two_halfspaces_match_oracle(
        (cuts, _anchor) in (1usize..=4).prop_flat_map(|d| cuts_through(d, 2)),
        seed in coords(4),
    ) {
        let d = cuts[0].dim();
        let x0 = Point::from_slice(&seed[..d]);
        let z = project_two_halfspaces(&cuts[0], &cuts[1], &x0).unwrap();
        let oracle = qp_project_cuts(&cuts, &x0).unwrap();
        prop_assert!(z.dist(&oracle) <= 1e-8, "{:?} vs {:?}", z, oracle);
        let pieces = [Piece::Cut(&cuts[0]), Piece::Cut(&cuts[1])];
        let run = project_onto_intersection(&pieces, &x0, 1e-12, 100_000).unwrap();
        prop_assert!(z.dist(&run.point) <= 1e-8);
    }

    #[test]
    fn many_halfspaces_match_oracle(
        (cuts, _anchor) in (2usize..=4).prop_flat_map(|d| (3usize..=6).prop_flat_map(move |m| cuts_through(d, m))),
        seed in coords(4),
    ) {
        let d = cuts[0].dim();
        let x0 = Point::from_slice(&seed[..d]);
        let z = project_halfspace_intersection(&cuts, &x0, 1e-12).unwrap();
        let oracle = qp_project_cuts(&cuts, &x0).unwrap();
        prop_assert!(z.dist(&oracle) <= 1e-8, "{:?} vs {:?}", z, oracle);
    }

    #[test]
    fn characterization_of_halfspace_intersections(
        (cuts, anchor) in (1usize..=4).prop_flat_map(|d| (1usize..=5).prop_flat_map(move |m| cuts_through(d, m))),
        seed in coords(4),
    ) {
        let d = cuts[0].dim();
        let x0 = Point::from_slice(&seed[..d]);
        let z = project_halfspace_intersection(&cuts, &x0, 1e-12).unwrap();
        for c in &cuts {
            prop_assert!(c.violation(&z) <= 1e-9);
        }
        prop_assert!((&x0 - &z).dot(&(&anchor - &z)) <= 1e-8);
    }
}

#[test]
fn spec_examples() {
    let set = FeasibleSet::cube(2, 0.0, 1.0).unwrap();
    assert_eq!(project(&set, &p(&[2.0, 0.5])).unwrap(), p(&[1.0, 0.5]));
    let ball = FeasibleSet::new_ball(Point::zeros(2), 1.0).unwrap();
    assert!(project(&ball, &p(&[3.0, 4.0])).unwrap().dist(&p(&[0.6, 0.8])) < 1e-15);
    assert_eq!(project(&FeasibleSet::WholeSpace, &p(&[-7.0, 2.0])).unwrap(), p(&[-7.0, 2.0]));
}

#[test]
fn empty_intersection_is_reported() {
    let a = HalfspaceCut::new(p(&[1.0, 0.0]), -1.0).unwrap();
    let b = HalfspaceCut::new(p(&[-1.0, 0.0]), -1.0).unwrap();
    assert_eq!(project_two_halfspaces(&a, &b, &p(&[0.0, 0.0])), Err(CoreError::EmptyIntersection));
}

#[test]
fn degenerate_cuts_are_ignored() {
    let cuts = vec![
        HalfspaceCut::whole_space(2),
        HalfspaceCut::new(p(&[1.0, 0.0]), 0.0).unwrap(),
        HalfspaceCut::new(p(&[0.0, 1.0]), 0.0).unwrap(),
        HalfspaceCut::new(p(&[1.0, 1.0]), 0.0).unwrap(),
    ];
    let z = project_halfspace_intersection(&cuts, &p(&[2.0, 1.0]), 1e-12).unwrap();
    assert!(z.norm() < 1e-12);
}
