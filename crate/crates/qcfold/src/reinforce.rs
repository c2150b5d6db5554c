//! Alternating fold/unfold iteration that recovers a flat-foldable domain
//! configuration from partial data.
//!
//! Each round solves two constrained problems on the same connectivity: a
//! fold solve that pushes the current domain estimate onto the visible data,
//! and an unfold solve that pulls the folded surface back over the known
//! outline. Vertex positions carry all state; connectivity and coloring
//! never change. The loop stops when the fold energy stalls or after a fixed
//! number of rounds, optionally straightening the folding lines every few
//! rounds to help multiply-folded configurations.

use std::path::Path;
use std::time::Instant;

use thiserror::Error;

use crate::assembly::Mode;
use crate::foldconfig::{straighten_positions, FoldColoring, FoldError};
use crate::foldconfig::max_distortion_on;
use crate::mesh::{MeshError, PinSet, Point, TriMesh};
use crate::solver::{loss_on, lsqc_solve, lsqc_solve_on, SolveError, SolveResult};

#[derive(Debug, Error)]
pub enum ReinforceError {
    #[error(transparent)]
    Fold(#[from] FoldError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("iteration {iter}: {source}")]
    Solve {
        iter: usize,
        source: SolveError,
        log: IterationLog,
    },
    #[error("iteration {iter} straightening failed: {source}")]
    Straighten {
        iter: usize,
        source: FoldError,
        log: IterationLog,
    },
    #[error("iteration {iter} distortion measurement failed: {source}")]
    Measure {
        iter: usize,
        source: FoldError,
        log: IterationLog,
    },
    #[error("final domain is not a valid mesh: {source}")]
    Domain {
        source: MeshError,
        log: IterationLog,
    },
}

/// One row of the iteration log.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub energy: f64,
    pub loss: f64,
    pub max_distortion: f64,
    pub seconds: f64,
}

/// Per-iteration history of a reinforcement run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationLog {
    records: Vec<IterationRecord>,
}

impl IterationLog {
    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub(crate) fn push(&mut self, record: IterationRecord) {
        self.records.push(record);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,energy,loss,max_distortion,seconds\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.iter, r.energy, r.loss, r.max_distortion, r.seconds
            ));
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv())
    }
}

/// Inputs of a reinforcement run.
///
/// `vis_pins` send vertices to their known positions on the folded surface;
/// `shape_pins` hold boundary vertices to the known outline of the flat
/// domain. `epsilon` stops the loop once the fold energy changes by no more
/// than this between consecutive rounds; `straighten_every` of 0 disables
/// the periodic folding-line straightening.
#[derive(Debug, Clone)]
pub struct ReinforceProblem {
    pub domain: TriMesh,
    pub coloring: FoldColoring,
    pub vis_pins: PinSet,
    pub shape_pins: PinSet,
    pub epsilon: f64,
    pub itermax: usize,
    pub straighten_every: usize,
}

impl ReinforceProblem {
    pub fn new(
        domain: TriMesh,
        coloring: FoldColoring,
        vis_pins: PinSet,
        shape_pins: PinSet,
    ) -> Result<Self, ReinforceError> {
        let problem = ReinforceProblem {
            domain,
            coloring,
            vis_pins,
            shape_pins,
            epsilon: 1e-8,
            itermax: 200,
            straighten_every: 25,
        };
        problem.validate()?;
        Ok(problem)
    }

    fn validate(&self) -> Result<(), ReinforceError> {
        if self.coloring.len() != self.domain.n_faces() {
            return Err(FoldError::Length {
                expected: self.domain.n_faces(),
                got: self.coloring.len(),
            }
            .into());
        }
        self.vis_pins.check_against(&self.domain)?;
        self.shape_pins.check_against(&self.domain)?;
        let boundary = self.domain.boundary_flags();
        for p in self.shape_pins.pins() {
            if !boundary[p.vertex] {
                return Err(MeshError::BadPins(format!(
                    "shape pin on vertex {} which is not on the boundary",
                    p.vertex
                ))
                .into());
            }
        }
        Ok(())
    }
}

/// Result of a reinforcement run: the recovered domain, the fold solve
/// computed from it (absent only when `itermax` was 0), and the log.
#[derive(Debug, Clone)]
pub struct ReinforceOutcome {
    pub domain: TriMesh,
    pub fold: Option<SolveResult>,
    pub log: IterationLog,
}

/// Data-enforcing solve: folds `domain` onto the visible data by solving the
/// exact-fold field of the coloring under the visible pins.
pub fn fold_step(
    domain: &TriMesh,
    coloring: &FoldColoring,
    vis_pins: &PinSet,
) -> Result<SolveResult, SolveError> {
    lsqc_solve(domain, &coloring.to_field(), vis_pins, Mode::Generalized)
}

/// Shape-enforcing solve: unfolds the folded positions back over the domain
/// outline held by the shape pins. `folded` is indexed like the mesh's
/// vertices.
pub fn unfold_step(
    mesh: &TriMesh,
    folded: &[Point],
    coloring: &FoldColoring,
    shape_pins: &PinSet,
) -> Result<SolveResult, SolveError> {
    assert_eq!(
        folded.len(),
        mesh.n_vertices(),
        "folded positions indexed like vertices"
    );
    lsqc_solve_on(
        folded,
        mesh.faces(),
        &coloring.to_field(),
        shape_pins,
        Mode::Generalized,
    )
}

/// Runs the alternating iteration. Each round folds the current domain
/// estimate onto the data, logs the round, checks the energy stall
/// criterion, and unfolds back to the next domain estimate. Intermediate
/// estimates may fold over themselves; only the final domain is required to
/// be a valid mesh.
pub fn reinforce(problem: &ReinforceProblem) -> Result<ReinforceOutcome, ReinforceError> {
    problem.validate()?;
    let field = problem.coloring.to_field();
    let labels = problem.coloring.labels();
    let faces = problem.domain.faces();
    let mut positions: Vec<Point> = problem.domain.vertices().to_vec();
    let mut log = IterationLog::default();

    if problem.itermax == 0 {
        return Ok(ReinforceOutcome {
            domain: problem.domain.clone(),
            fold: None,
            log,
        });
    }

    let mut prev_energy = 0.0;
    let mut skip_stall_check = false;
    let mut final_fold = None;

    for n in 1..=problem.itermax {
        let started = Instant::now();

        let due_straighten =
            problem.straighten_every > 0 && n > 1 && (n - 1) % problem.straighten_every == 0;
        if due_straighten {
            match straighten_positions(&problem.domain, &problem.coloring, &positions) {
                Ok((straightened, _)) => {
                    positions = straightened;
                    skip_stall_check = true;
                }
                Err(source) => {
                    return Err(ReinforceError::Straighten {
                        iter: n,
                        source,
                        log,
                    })
                }
            }
        }

        let fold = match lsqc_solve_on(
            &positions,
            faces,
            &field,
            &problem.vis_pins,
            Mode::Generalized,
        ) {
            Ok(f) => f,
            Err(source) => return Err(ReinforceError::Solve { iter: n, source, log }),
        };
        let loss = match loss_on(&positions, faces, &fold.image, labels) {
            Ok(l) => l,
            Err(source) => return Err(ReinforceError::Solve { iter: n, source, log }),
        };
        let distortion = match max_distortion_on(&positions, faces, &fold.image, labels) {
            Ok(d) => d,
            Err(source) => return Err(ReinforceError::Measure { iter: n, source, log }),
        };
        log.push(IterationRecord {
            iter: n,
            energy: fold.energy,
            loss,
            max_distortion: distortion,
            seconds: started.elapsed().as_secs_f64(),
        });

        let stalled = !skip_stall_check && (fold.energy - prev_energy).abs() <= problem.epsilon;
        skip_stall_check = false;
        prev_energy = fold.energy;

        if stalled || n == problem.itermax {
            final_fold = Some(fold);
            break;
        }

        let unfold = match lsqc_solve_on(
            &fold.image,
            faces,
            &field,
            &problem.shape_pins,
            Mode::Generalized,
        ) {
            Ok(u) => u,
            Err(source) => return Err(ReinforceError::Solve { iter: n, source, log }),
        };
        positions = unfold.image;
    }

    let domain = problem
        .domain
        .with_positions(positions)
        .map_err(|source| ReinforceError::Domain {
            source,
            log: log.clone(),
        })?;
    Ok(ReinforceOutcome {
        domain,
        fold: final_fold,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshgen;

    /// Unit square split at x = 0.5, right half reversing.
    fn half_fold() -> (TriMesh, FoldColoring) {
        let mesh = meshgen::rect_grid(2, 1, 1.0, 1.0);
        let coloring = FoldColoring::new(&mesh, vec![1, 1, -1, -1]).unwrap();
        (mesh, coloring)
    }

    fn folded_positions(mesh: &TriMesh) -> Vec<Point> {
        mesh.vertices()
            .iter()
            .map(|p| {
                if p[0] > 0.5 {
                    [1.0 - p[0], p[1]]
                } else {
                    *p
                }
            })
            .collect()
    }

    #[test]
    fn identity_data_gives_the_identity_fold() {
        let mesh = meshgen::rect_grid(2, 2, 1.0, 1.0);
        let coloring = FoldColoring::new(&mesh, vec![1; 8]).unwrap();
        let pins = PinSet::from_targets([(0, [0.0, 0.0]), (2, [1.0, 0.0])]).unwrap();
        let res = fold_step(&mesh, &coloring, &pins).unwrap();
        for (p, q) in mesh.vertices().iter().zip(res.image.iter()) {
            assert!((p[0] - q[0]).abs() < 1e-9);
            assert!((p[1] - q[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn unfolding_an_exact_fold_recovers_the_square() {
        let (mesh, coloring) = half_fold();
        let folded = folded_positions(&mesh);
        let shape_pins = PinSet::from_targets([
            (0, [0.0, 0.0]),
            (2, [1.0, 0.0]),
            (3, [0.0, 1.0]),
            (5, [1.0, 1.0]),
        ])
        .unwrap();
        let res = unfold_step(&mesh, &folded, &coloring, &shape_pins).unwrap();
        for (p, q) in mesh.vertices().iter().zip(res.image.iter()) {
            assert!((p[0] - q[0]).abs() < 1e-8, "{p:?} vs {q:?}");
            assert!((p[1] - q[1]).abs() < 1e-8);
        }
    }

    #[test]
    fn unfolding_a_flat_mesh_is_the_identity() {
        let mesh = meshgen::rect_grid(2, 2, 1.0, 1.0);
        let coloring = FoldColoring::new(&mesh, vec![1; 8]).unwrap();
        let shape_pins = PinSet::from_targets([
            (0, [0.0, 0.0]),
            (2, [1.0, 0.0]),
            (6, [0.0, 1.0]),
            (8, [1.0, 1.0]),
        ])
        .unwrap();
        let res = unfold_step(&mesh, mesh.vertices(), &coloring, &shape_pins).unwrap();
        for (p, q) in mesh.vertices().iter().zip(res.image.iter()) {
            assert!((p[0] - q[0]).abs() < 1e-9);
            assert!((p[1] - q[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn exact_configuration_is_a_fixed_point() {
        let (mesh, coloring) = half_fold();
        let folded = folded_positions(&mesh);
        let vis_pins = PinSet::from_targets([
            (0, folded[0]),
            (1, folded[1]),
            (3, folded[3]),
            (4, folded[4]),
        ])
        .unwrap();
        let shape_pins = PinSet::from_targets([
            (0, [0.0, 0.0]),
            (2, [1.0, 0.0]),
            (3, [0.0, 1.0]),
            (5, [1.0, 1.0]),
        ])
        .unwrap();
        let problem =
            ReinforceProblem::new(mesh.clone(), coloring, vis_pins, shape_pins).unwrap();
        let outcome = reinforce(&problem).unwrap();
        assert_eq!(outcome.log.len(), 1);
        assert!(outcome.log.records()[0].loss < 1e-16);
        for (p, q) in mesh.vertices().iter().zip(outcome.domain.vertices()) {
            assert!((p[0] - q[0]).abs() < 1e-8);
            assert!((p[1] - q[1]).abs() < 1e-8);
        }
        let fold = outcome.fold.expect("fold present");
        for (p, q) in folded.iter().zip(fold.image.iter()) {
            assert!((p[0] - q[0]).abs() < 1e-8);
            assert!((p[1] - q[1]).abs() < 1e-8);
        }
    }

    #[test]
    fn itermax_zero_returns_the_initial_state() {
        let (mesh, coloring) = half_fold();
        let vis_pins = PinSet::from_targets([(0, [0.0, 0.0]), (1, [0.5, 0.0])]).unwrap();
        let shape_pins = PinSet::from_targets([(0, [0.0, 0.0]), (2, [1.0, 0.0])]).unwrap();
        let mut problem =
            ReinforceProblem::new(mesh.clone(), coloring, vis_pins, shape_pins).unwrap();
        problem.itermax = 0;
        let outcome = reinforce(&problem).unwrap();
        assert!(outcome.log.is_empty());
        assert!(outcome.fold.is_none());
        assert_eq!(outcome.domain.vertices(), mesh.vertices());
    }

    #[test]
    fn wrong_interior_improves_over_iterations() {
        let mesh = meshgen::rect_grid(6, 6, 1.0, 1.0);
        let labels: Vec<i8> = (0..mesh.n_faces())
            .map(|f| {
                let quad = f / 2;
                let col = quad % 6;
                if col < 3 {
                    1
                } else {
                    -1
                }
            })
            .collect();
        let coloring = FoldColoring::new(&mesh, labels).unwrap();
        let truth: Vec<Point> = mesh
            .vertices()
            .iter()
            .map(|p| {
                if p[0] > 0.5 {
                    [1.0 - p[0], p[1]]
                } else {
                    *p
                }
            })
            .collect();

        let boundary = mesh.boundary_flags();
        let shape_pins = PinSet::from_targets(
            (0..mesh.n_vertices())
                .filter(|&v| boundary[v])
                .map(|v| (v, mesh.vertices()[v]))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let vis_pins = PinSet::from_targets(
            (0..mesh.n_vertices())
                .filter(|&v| boundary[v] && mesh.vertices()[v][0] < 0.4)
                .map(|v| (v, truth[v]))
                .collect::<Vec<_>>(),
        )
        .unwrap();

        // Start from a domain whose interior is smoothly wrong.
        let warped: Vec<Point> = mesh
            .vertices()
            .iter()
            .map(|p| {
                let bump = 0.1
                    * (std::f64::consts::PI * p[0]).sin()
                    * (std::f64::consts::PI * p[1]).sin();
                [p[0] + bump, p[1]]
            })
            .collect();
        let domain = mesh.with_positions(warped).unwrap();
        let mut problem =
            ReinforceProblem::new(domain, coloring, vis_pins, shape_pins).unwrap();
        problem.itermax = 30;
        problem.epsilon = 0.0;
        problem.straighten_every = 0;
        let outcome = reinforce(&problem).unwrap();
        let records = outcome.log.records();
        assert!(records.len() >= 2);
        let first = records.first().unwrap().loss;
        let last = records.last().unwrap().loss;
        assert!(
            last < 0.5 * first,
            "loss did not improve: {first} -> {last}"
        );
    }

    #[test]
    fn identical_problems_produce_identical_logs() {
        let (mesh, coloring) = half_fold();
        let folded = folded_positions(&mesh);
        let vis_pins =
            PinSet::from_targets([(0, folded[0]), (4, [0.45, 1.0])]).unwrap();
        let shape_pins = PinSet::from_targets([
            (0, [0.0, 0.0]),
            (2, [1.0, 0.0]),
            (3, [0.0, 1.0]),
            (5, [1.0, 1.0]),
        ])
        .unwrap();
        let mut problem =
            ReinforceProblem::new(mesh, coloring, vis_pins, shape_pins).unwrap();
        problem.itermax = 5;
        problem.epsilon = 0.0;
        let a = reinforce(&problem).unwrap();
        let b = reinforce(&problem).unwrap();
        assert_eq!(a.log.len(), b.log.len());
        for (ra, rb) in a.log.records().iter().zip(b.log.records()) {
            assert_eq!(ra.energy, rb.energy);
            assert_eq!(ra.loss, rb.loss);
            assert_eq!(ra.max_distortion, rb.max_distortion);
        }
    }

    #[test]
    fn csv_log_has_header_and_one_row_per_iteration() {
        let mut log = IterationLog::default();
        log.push(IterationRecord {
            iter: 1,
            energy: 0.5,
            loss: 0.25,
            max_distortion: 0.1,
            seconds: 0.01,
        });
        let csv = log.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "iter,energy,loss,max_distortion,seconds");
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("1,0.5,0.25,0.1,"));
    }

    #[test]
    fn shape_pins_must_sit_on_the_boundary() {
        let mesh = meshgen::rect_grid(2, 2, 1.0, 1.0);
        let coloring = FoldColoring::new(&mesh, vec![1; 8]).unwrap();
        let vis_pins = PinSet::from_targets([(0, [0.0, 0.0]), (2, [1.0, 0.0])]).unwrap();
        // Vertex 4 is the interior vertex of the 3 x 3 grid.
        let shape_pins = PinSet::from_targets([(0, [0.0, 0.0]), (4, [0.5, 0.5])]).unwrap();
        let err = ReinforceProblem::new(mesh, coloring, vis_pins, shape_pins).unwrap_err();
        assert!(err.to_string().contains("not on the boundary"));
    }
}
