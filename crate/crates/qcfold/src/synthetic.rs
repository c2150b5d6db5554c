//! Synthetic reinforcement fixtures with known ground truth.
//!
//! Each fixture starts from a uniformly triangulated unit square, folds it
//! by an exact piecewise isometry (so the true folded positions are known to
//! the last bit), hides a region of the surface, and hands the solver a
//! deliberately wrong initial domain whose error lives strictly inside the
//! hidden region. Visible boundary vertices are pinned at their true folded
//! positions; a sparse subset of boundary vertices (always including the
//! corners) is pinned to the true outline during unfolds. Keeping the
//! outline pins sparse matters: clamping the whole boundary makes every
//! unfold snap the domain back in a handful of steps, while a few anchors
//! leave slow relaxation modes in play, so the decay of the loss over
//! hundreds of iterations is actually informative. Recovering the hidden
//! fold geometry from this data is the job of the reinforcement iteration,
//! and these fixtures are what its convergence is measured on.

use crate::foldconfig::FoldColoring;
use crate::mesh::{PinSet, Point, TriMesh};
use crate::meshgen;
use crate::reinforce::ReinforceProblem;

/// A ground-truth reinforcement problem: the true flat domain, its exact
/// folded positions, and a ready-to-run problem whose initial domain is
/// wrong wherever the surface is hidden.
#[derive(Debug, Clone)]
pub struct ReinforceFixture {
    pub name: &'static str,
    pub truth_domain: TriMesh,
    pub truth_fold: Vec<Point>,
    pub problem: ReinforceProblem,
    pub occluded_fraction: f64,
}

fn is_unit_square_corner(p: Point) -> bool {
    (p[0] == 0.0 || p[0] == 1.0) && (p[1] == 0.0 || p[1] == 1.0)
}

fn build(
    name: &'static str,
    n: usize,
    outline_stride: usize,
    fold: fn(Point) -> Point,
    label: fn(Point) -> i8,
    occluded: fn(Point) -> bool,
    warp: fn(Point) -> Point,
) -> ReinforceFixture {
    assert!(n.is_multiple_of(16), "fixture creases must lie on grid lines");
    let mesh = meshgen::rect_grid(n, n, 1.0, 1.0);
    let labels: Vec<i8> = (0..mesh.n_faces())
        .map(|f| {
            let [a, b, c] = mesh.face_points(f);
            label([
                (a[0] + b[0] + c[0]) / 3.0,
                (a[1] + b[1] + c[1]) / 3.0,
            ])
        })
        .collect();
    let coloring = FoldColoring::new(&mesh, labels).expect("grid coloring");

    let truth_fold: Vec<Point> = mesh.vertices().iter().map(|&p| fold(p)).collect();
    let hidden: Vec<bool> = mesh.vertices().iter().map(|&p| occluded(p)).collect();
    let occluded_fraction =
        hidden.iter().filter(|&&h| h).count() as f64 / mesh.n_vertices() as f64;

    let flags = mesh.boundary_flags();
    let vis_pins = PinSet::from_targets(
        (0..mesh.n_vertices())
            .filter(|&v| flags[v] && !hidden[v])
            .map(|v| (v, truth_fold[v]))
            .collect::<Vec<_>>(),
    )
    .expect("visible boundary pins");
    let shape_pins = PinSet::from_targets(
        (0..mesh.n_vertices())
            .filter(|&v| flags[v])
            .enumerate()
            .filter(|&(k, v)| {
                is_unit_square_corner(mesh.vertices()[v])
                    || (outline_stride > 0 && k % outline_stride == 0)
            })
            .map(|(_, v)| (v, mesh.vertices()[v]))
            .collect::<Vec<_>>(),
    )
    .expect("outline pins");

    let warped: Vec<Point> = mesh
        .vertices()
        .iter()
        .map(|&p| if occluded(p) { warp(p) } else { p })
        .collect();
    let initial = mesh.with_positions(warped).expect("warped start domain");

    let mut problem = ReinforceProblem::new(initial, coloring, vis_pins, shape_pins)
        .expect("fixture problem");
    problem.epsilon = 0.0;
    problem.itermax = 200;
    problem.straighten_every = 0;

    ReinforceFixture {
        name,
        truth_domain: mesh,
        truth_fold,
        problem,
        occluded_fraction,
    }
}

/// Unit square folded once across the vertical line x = 5/8, with a band
/// around the fold hidden and the hidden part of the start domain bulged
/// sideways so the initial fold line is wrong.
pub fn one_fold_sized(n: usize) -> ReinforceFixture {
    build(
        "one-fold",
        n,
        0,
        |p| {
            if p[0] > 0.625 {
                [1.25 - p[0], p[1]]
            } else {
                p
            }
        },
        |c| if c[0] < 0.625 { 1 } else { -1 },
        |p| (0.4..=0.875).contains(&p[0]) && p[1] < 0.8,
        |p| {
            let sx = (std::f64::consts::PI * (p[0] - 0.4) / 0.475).sin();
            let sy = (std::f64::consts::PI * p[1] / 0.8).sin();
            [p[0] + 0.08 * sx * sy, p[1]]
        },
    )
}

pub fn one_fold() -> ReinforceFixture {
    one_fold_sized(32)
}

/// Unit square folded twice into a Z across x = 7/16 and x = 11/16: the
/// middle strip reflects, the right strip translates back over the flat
/// part. Both creases run through the hidden band.
pub fn two_fold_sized(n: usize) -> ReinforceFixture {
    const C1: f64 = 0.4375;
    const C2: f64 = 0.6875;
    build(
        "two-fold",
        n,
        12,
        |p| {
            if p[0] <= C1 {
                p
            } else if p[0] <= C2 {
                [2.0 * C1 - p[0], p[1]]
            } else {
                [p[0] - 2.0 * (C2 - C1), p[1]]
            }
        },
        |c| {
            if c[0] > C1 && c[0] < C2 {
                -1
            } else {
                1
            }
        },
        |p| p[0] > 0.3 && p[0] < 0.8 && p[1] < 0.75,
        |p| {
            let sx = (std::f64::consts::PI * (p[0] - 0.3) / 0.5).sin();
            let sy = (std::f64::consts::PI * p[1] / 0.75).sin();
            [p[0] + 0.08 * sx * sy, p[1]]
        },
    )
}

pub fn two_fold() -> ReinforceFixture {
    two_fold_sized(32)
}

/// Unit square folded in quarters, (x, y) -> (min(x, 1-x), min(y, 1-y)),
/// whose two creases cross in a degree-4 singular vertex at the center.
/// The hidden corner contains the crossing, and the start domain is bulged
/// diagonally there.
pub fn cusp_fold_sized(n: usize) -> ReinforceFixture {
    build(
        "cusp",
        n,
        32,
        |p| [p[0].min(1.0 - p[0]), p[1].min(1.0 - p[1])],
        |c| {
            if (c[0] < 0.5) == (c[1] < 0.5) {
                1
            } else {
                -1
            }
        },
        |p| p[0] > 0.3 && p[1] > 0.3,
        |p| {
            let sx = (std::f64::consts::PI * (p[0] - 0.3) / 0.7).sin();
            let sy = (std::f64::consts::PI * (p[1] - 0.3) / 0.7).sin();
            let bump = 0.1 * sx * sy;
            [p[0] + bump, p[1] + bump]
        },
    )
}

pub fn cusp_fold() -> ReinforceFixture {
    cusp_fold_sized(32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foldconfig::{classify_singular_vertices, kawasaki_defect, VertexClass};
    use crate::solver::loss;

    fn fixtures() -> Vec<ReinforceFixture> {
        vec![one_fold_sized(16), two_fold_sized(16), cusp_fold_sized(16)]
    }

    #[test]
    fn true_configurations_fold_exactly() {
        for fx in fixtures() {
            let loss = loss(
                &fx.truth_domain,
                &fx.truth_fold,
                &fx.problem.coloring,
            )
            .unwrap();
            assert!(loss < 1e-18, "{}: residual loss {loss}", fx.name);
        }
    }

    #[test]
    fn enough_of_the_surface_is_hidden() {
        for fx in fixtures() {
            assert!(
                fx.occluded_fraction >= 0.3,
                "{}: only {:.0}% hidden",
                fx.name,
                100.0 * fx.occluded_fraction
            );
        }
    }

    #[test]
    fn start_domains_are_wrong_only_where_hidden() {
        for fx in fixtures() {
            let truth = fx.truth_domain.vertices();
            let start = fx.problem.domain.vertices();
            let flags = fx.truth_domain.boundary_flags();
            let mut worst = 0.0f64;
            for v in 0..truth.len() {
                let d = ((truth[v][0] - start[v][0]).powi(2)
                    + (truth[v][1] - start[v][1]).powi(2))
                .sqrt();
                if flags[v] {
                    assert!(d == 0.0, "{}: boundary vertex {v} moved", fx.name);
                }
                worst = worst.max(d);
            }
            assert!(worst > 0.05, "{}: start domain barely wrong", fx.name);
        }
    }

    #[test]
    fn pins_follow_the_visibility_split() {
        for fx in fixtures() {
            let flags = fx.truth_domain.boundary_flags();
            for pin in fx.problem.shape_pins.pins() {
                assert!(flags[pin.vertex]);
                assert_eq!(pin.target(), fx.truth_domain.vertices()[pin.vertex]);
            }
            for pin in fx.problem.vis_pins.pins() {
                assert!(flags[pin.vertex]);
                assert_eq!(pin.target(), fx.truth_fold[pin.vertex]);
            }
            assert!(fx.problem.vis_pins.len() >= 2);
        }
    }

    #[test]
    fn outline_pins_are_sparse_but_keep_the_corners() {
        for fx in fixtures() {
            let n_boundary = fx
                .truth_domain
                .boundary_flags()
                .iter()
                .filter(|&&b| b)
                .count();
            let pins = fx.problem.shape_pins.len();
            assert!(pins < n_boundary / 2, "{}: {pins} outline pins", fx.name);
            for corner in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]] {
                assert!(
                    fx.problem
                        .shape_pins
                        .pins()
                        .iter()
                        .any(|pin| fx.truth_domain.vertices()[pin.vertex] == corner),
                    "{}: corner {corner:?} not pinned",
                    fx.name
                );
            }
        }
    }

    #[test]
    fn cusp_fixture_has_a_balanced_crossing() {
        let fx = cusp_fold_sized(16);
        let center = fx
            .truth_domain
            .vertices()
            .iter()
            .position(|p| *p == [0.5, 0.5])
            .unwrap();
        let classes =
            classify_singular_vertices(&fx.truth_domain, &fx.problem.coloring).unwrap();
        let class = classes
            .iter()
            .find(|(v, _)| *v == center)
            .map(|(_, c)| *c)
            .unwrap();
        assert_eq!(class, VertexClass::Cusp(2));
        let defect = kawasaki_defect(&fx.truth_domain, &fx.problem.coloring, center).unwrap();
        assert!(defect.abs() < 1e-12);
    }

    #[test]
    fn one_fold_crease_is_initially_displaced() {
        let fx = one_fold_sized(16);
        let start = fx.problem.domain.vertices();
        let moved = fx
            .truth_domain
            .vertices()
            .iter()
            .enumerate()
            .filter(|(_, p)| p[0] == 0.625)
            .map(|(v, p)| (start[v][0] - p[0]).abs())
            .fold(0.0f64, f64::max);
        assert!(moved > 0.04, "crease barely displaced: {moved}");
    }
}
