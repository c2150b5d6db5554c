//! Miura-ori pattern generation, polynomial composition of the domain, and
//! a fold/unfold repair loop that drives a perturbed pattern back toward
//! flat-foldability.
//!
//! A pattern is a parallelogram grid with the classical checkerboard
//! two-coloring; its crease grid satisfies the alternating angle condition
//! exactly, so the generated pattern folds flat up to roundoff. Composing
//! the domain with a holomorphic polynomial perturbs the crease angles
//! without touching connectivity, which is how the repair loop's test
//! instances are made.

use std::time::Instant;

use num_complex::Complex64;
use thiserror::Error;

use crate::assembly::Mode;
use crate::foldconfig::{max_distortion_on, FoldColoring, FoldError};
use crate::mesh::{tri_area, MeshError, PinSet, Point, TriMesh};
use crate::reinforce::{IterationLog, IterationRecord};
use crate::solver::{fold_anchor_edge, loss_on, lsqc_solve_on, SolveError};

#[derive(Debug, Error)]
pub enum PatternError {
    #[error("invalid pattern spec: {0}")]
    BadSpec(String),
    #[error("composition inverts {} faces (first: {:?})", faces.len(), faces.first())]
    Inverted { faces: Vec<usize> },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fold(#[from] FoldError),
    #[error("repair iteration {iter}: {source}")]
    Solve {
        iter: usize,
        source: SolveError,
        log: IterationLog,
    },
    #[error("repair iteration {iter} distortion measurement failed: {source}")]
    Measure {
        iter: usize,
        source: FoldError,
        log: IterationLog,
    },
    #[error("repaired domain is not a valid mesh: {source}")]
    Domain {
        source: MeshError,
        log: IterationLog,
    },
}

/// Size and shape of a classical Miura-ori pattern. `rows` and `cols` count
/// unit cells of 2 x 2 parallelogram quads; `angle` is the parallelogram
/// slant in radians, strictly between 0 and a right angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiuraSpec {
    pub rows: usize,
    pub cols: usize,
    pub cell_width: f64,
    pub cell_height: f64,
    pub angle: f64,
}

impl MiuraSpec {
    pub fn new(
        rows: usize,
        cols: usize,
        cell_width: f64,
        cell_height: f64,
        angle: f64,
    ) -> Result<Self, PatternError> {
        let spec = MiuraSpec {
            rows,
            cols,
            cell_width,
            cell_height,
            angle,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<(), PatternError> {
        if self.rows == 0 || self.cols == 0 {
            return Err(PatternError::BadSpec(format!(
                "need at least 1 x 1 cells, got {} x {}",
                self.rows, self.cols
            )));
        }
        if self.cell_width <= 0.0 || !self.cell_width.is_finite() {
            return Err(PatternError::BadSpec(format!(
                "cell width must be positive, got {}",
                self.cell_width
            )));
        }
        if self.cell_height <= 0.0 || !self.cell_height.is_finite() {
            return Err(PatternError::BadSpec(format!(
                "cell height must be positive, got {}",
                self.cell_height
            )));
        }
        if !(self.angle > 0.0 && self.angle < std::f64::consts::FRAC_PI_2) {
            return Err(PatternError::BadSpec(format!(
                "shear angle must lie strictly between 0 and pi/2, got {}",
                self.angle
            )));
        }
        Ok(())
    }

    /// Horizontal offset between consecutive vertex rows.
    pub fn offset(&self) -> f64 {
        self.cell_height / self.angle.tan()
    }
}

/// Builds the classical pattern: a grid of `2 rows x 2 cols` parallelogram
/// quads, odd vertex rows shifted by the shear offset, each quad split into
/// two triangles carrying the quad's checkerboard color. Every grid edge is
/// a crease and every interior crease vertex balances its alternating angle
/// sum exactly, so the pattern folds flat by construction.
pub fn miura_pattern(spec: &MiuraSpec) -> Result<(TriMesh, FoldColoring), PatternError> {
    spec.validate()?;
    let nx = 2 * spec.cols;
    let ny = 2 * spec.rows;
    let w = spec.cell_width;
    let h = spec.cell_height;
    let delta = spec.offset();

    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for i in 0..=ny {
        let shift = if i % 2 == 1 { delta } else { 0.0 };
        for j in 0..=nx {
            vertices.push([j as f64 * w + shift, i as f64 * h]);
        }
    }

    let mut faces = Vec::with_capacity(2 * nx * ny);
    let mut labels = Vec::with_capacity(2 * nx * ny);
    for i in 0..ny {
        for j in 0..nx {
            let a = i * (nx + 1) + j;
            let b = a + 1;
            let c = a + nx + 2;
            let d = a + nx + 1;
            faces.push([a, b, c]);
            faces.push([a, c, d]);
            let label = if (i + j) % 2 == 0 { 1 } else { -1 };
            labels.push(label);
            labels.push(label);
        }
    }

    let mesh = TriMesh::new(vertices, faces)?;
    let coloring = FoldColoring::new(&mesh, labels)?;
    Ok((mesh, coloring))
}

/// Replaces every vertex `z = x + iy` by the polynomial value
/// `poly[0] + poly[1] z + poly[2] z^2 + ...`. Connectivity is unchanged and
/// any coloring of the input applies verbatim to the output. Fails if the
/// mapped positions invert or flatten any face.
pub fn compose_conformal(mesh: &TriMesh, poly: &[Complex64]) -> Result<TriMesh, PatternError> {
    let mapped: Vec<Point> = mesh
        .vertices()
        .iter()
        .map(|p| {
            let z = Complex64::new(p[0], p[1]);
            let mut acc = Complex64::new(0.0, 0.0);
            for &c in poly.iter().rev() {
                acc = acc * z + c;
            }
            [acc.re, acc.im]
        })
        .collect();
    let inverted: Vec<usize> = mesh
        .faces()
        .iter()
        .enumerate()
        .filter_map(|(fi, &[a, b, c])| {
            if tri_area(mapped[a], mapped[b], mapped[c]) <= 0.0 {
                Some(fi)
            } else {
                None
            }
        })
        .collect();
    if !inverted.is_empty() {
        return Err(PatternError::Inverted { faces: inverted });
    }
    Ok(mesh.with_positions(mapped)?)
}

/// Alternates fold and unfold solves until the fold's maximal distortion
/// drops to `tol` or `itermax` rounds have run. Each fold anchors on one
/// boundary edge; each unfold pins every boundary vertex to its current
/// position, so the interior drifts toward a flat-foldable configuration
/// while the outline stays put. Returns the repaired domain together with
/// the per-round log.
pub fn repair_flat_foldability(
    mesh: &TriMesh,
    coloring: &FoldColoring,
    tol: f64,
    itermax: usize,
) -> Result<(TriMesh, IterationLog), PatternError> {
    if coloring.len() != mesh.n_faces() {
        return Err(FoldError::Length {
            expected: mesh.n_faces(),
            got: coloring.len(),
        }
        .into());
    }
    if tol.is_nan() || tol < 0.0 {
        return Err(PatternError::BadSpec(format!(
            "repair tolerance must be nonnegative, got {tol}"
        )));
    }
    let field = coloring.to_field();
    let labels = coloring.labels();
    let faces = mesh.faces();
    let (ea, eb) = fold_anchor_edge(mesh)?;
    let flags = mesh.boundary_flags();
    let boundary: Vec<usize> = (0..mesh.n_vertices()).filter(|&v| flags[v]).collect();

    let mut positions: Vec<Point> = mesh.vertices().to_vec();
    let mut log = IterationLog::default();

    for n in 1..=itermax {
        let started = Instant::now();
        let pins = PinSet::from_targets([(ea, positions[ea]), (eb, positions[eb])])?;
        let fold = match lsqc_solve_on(&positions, faces, &field, &pins, Mode::Generalized) {
            Ok(f) => f,
            Err(source) => return Err(PatternError::Solve { iter: n, source, log }),
        };
        let loss = match loss_on(&positions, faces, &fold.image, labels) {
            Ok(l) => l,
            Err(source) => return Err(PatternError::Solve { iter: n, source, log }),
        };
        let distortion = match max_distortion_on(&positions, faces, &fold.image, labels) {
            Ok(d) => d,
            Err(source) => return Err(PatternError::Measure { iter: n, source, log }),
        };
        log.push(IterationRecord {
            iter: n,
            energy: fold.energy,
            loss,
            max_distortion: distortion,
            seconds: started.elapsed().as_secs_f64(),
        });

        if distortion <= tol || n == itermax {
            break;
        }

        let shape = PinSet::from_targets(
            boundary
                .iter()
                .map(|&v| (v, positions[v]))
                .collect::<Vec<_>>(),
        )?;
        let unfold = match lsqc_solve_on(&fold.image, faces, &field, &shape, Mode::Generalized) {
            Ok(u) => u,
            Err(source) => return Err(PatternError::Solve { iter: n, source, log }),
        };
        positions = unfold.image;
    }

    let domain = mesh
        .with_positions(positions)
        .map_err(|source| PatternError::Domain {
            source,
            log: log.clone(),
        })?;
    Ok((domain, log))
}
