//! End-to-end recovery on the synthetic one-fold scene with every outline
//! vertex pinned, checking the geometry the iteration is supposed to
//! restore: the crease comes back straight.

use qcfold::reinforce::reinforce;
use qcfold::synthetic::one_fold_sized;
use qcfold::{PinSet, Point};

fn point_line_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let r = [p[0] - a[0], p[1] - a[1]];
    (d[0] * r[1] - d[1] * r[0]).abs() / (d[0] * d[0] + d[1] * d[1]).sqrt()
}

#[test]
fn dense_outline_recovery_straightens_the_crease() {
    let fx = one_fold_sized(16);
    let truth = &fx.truth_domain;
    let flags = truth.boundary_flags();
    let outline: Vec<(usize, Point)> = (0..truth.n_vertices())
        .filter(|&v| flags[v])
        .map(|v| (v, truth.vertices()[v]))
        .collect();

    let mut problem = fx.problem;
    problem.shape_pins = PinSet::from_targets(outline).unwrap();
    problem.itermax = 60;

    let outcome = reinforce(&problem).unwrap();
    let records = outcome.log.records();
    let (first, last) = (records[0].loss, records.last().unwrap().loss);
    assert!(
        last < 1e-4 * first,
        "loss only fell from {first:e} to {last:e} in {} iterations",
        records.len()
    );

    // The truth fold line sits on the x = 0.625 grid column. Its vertices,
    // wherever the recovered domain puts them, must be collinear again.
    let mut crease: Vec<usize> = (0..truth.n_vertices())
        .filter(|&v| (truth.vertices()[v][0] - 0.625).abs() < 1e-12)
        .collect();
    assert!(crease.len() >= 5, "fixture no longer has a grid-aligned crease");
    crease.sort_by(|&a, &b| truth.vertices()[a][1].total_cmp(&truth.vertices()[b][1]));

    let recovered = outcome.domain.vertices();
    let (head, tail) = (recovered[crease[0]], recovered[*crease.last().unwrap()]);
    let worst = crease[1..crease.len() - 1]
        .iter()
        .map(|&v| point_line_distance(recovered[v], head, tail))
        .fold(0.0, f64::max);
    assert!(worst < 1e-3, "crease still bent by {worst:e}");
}
