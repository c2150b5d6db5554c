//! Sparse assembly of the quadratic forms behind the fold solvers.
//!
//! For a mesh with vertex count n and a Beltrami field, the assembled system
//! is the symmetric 2n x 2n matrix
//!
//! ```text
//! M = diag(L, L) - 2 A
//! ```
//!
//! where `L` is the cotangent Laplacian of the coefficient-transformed
//! triangles and `A` is the (sign-adjusted) image area form. Unknowns are
//! stacked as x = (u; v): row/column i addresses u_i and row/column n + i
//! addresses v_i. The quadratic form `0.5 x^T M x` is the discrete
//! least-squares conformality energy; in generalized mode faces with
//! reversing coefficients (|mu| > 1 or mu = inf) contribute the
//! anti-conformal residual instead.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::coeff::{mu_to_p_inv, reduce_coefficient, BeltramiField, CoeffError, Mu};
use crate::mesh::{tri_area, Point, TriMesh};

/// Assembly failures, each naming the offending face.
#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("field covers {got} faces but the mesh has {expected}")]
    FieldLength { expected: usize, got: usize },
    #[error("face {face}: {source}")]
    Coeff { face: usize, source: CoeffError },
    #[error("face {face} is degenerate (area {area:e})")]
    DegenerateFace { face: usize, area: f64 },
}

/// Which energy the assembled system represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Every face contributes the conformality residual of its transformed
    /// triangle; the form is positive semidefinite.
    Signed,
    /// Faces with reversing coefficients contribute the anti-conformal
    /// residual: the image area of such a face enters with flipped sign.
    Generalized,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Signed => "signed",
            Mode::Generalized => "generalized",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "signed" => Ok(Mode::Signed),
            "generalized" => Ok(Mode::Generalized),
            other => Err(format!(
                "unknown mode {other:?}, expected \"signed\" or \"generalized\""
            )),
        }
    }
}

/// Symmetric sparse matrix in aggregated coordinate form.
///
/// Entries are deduplicated and kept sorted by (row, col); both triangles of
/// a symmetric matrix are stored explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct CooMatrix {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl CooMatrix {
    /// Aggregates raw triplets, summing duplicates. Summation happens in
    /// triplet order per (row, col) key, so the result is reproducible for a
    /// fixed input order.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(i, j, v) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            *map.entry((i, j)).or_insert(0.0) += v;
        }
        let entries = map.into_iter().map(|((i, j), v)| (i, j, v)).collect();
        CooMatrix {
            nrows,
            ncols,
            entries,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// Aggregated entries, sorted by (row, col).
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// y = M x.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "matvec dimension mismatch");
        let mut y = vec![0.0; self.nrows];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }

    /// x^T M y.
    pub fn quadratic(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), self.nrows, "quadratic row dimension mismatch");
        assert_eq!(y.len(), self.ncols, "quadratic col dimension mismatch");
        let mut acc = 0.0;
        for &(i, j, v) in &self.entries {
            acc += x[i] * v * y[j];
        }
        acc
    }

    /// True when every stored (i, j) has a stored (j, i) with the same value.
    pub fn is_symmetric(&self) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        let map: BTreeMap<(usize, usize), f64> = self
            .entries
            .iter()
            .map(|&(i, j, v)| ((i, j), v))
            .collect();
        self.entries
            .iter()
            .all(|&(i, j, v)| map.get(&(j, i)).copied() == Some(v))
    }

    /// MatrixMarket coordinate dump (general form, 1-based indices).
    pub fn to_matrix_market(&self) -> String {
        let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
        out.push_str(&format!(
            "{} {} {}\n",
            self.nrows,
            self.ncols,
            self.entries.len()
        ));
        for &(i, j, v) in &self.entries {
            out.push_str(&format!("{} {} {}\n", i + 1, j + 1, v));
        }
        out
    }
}

/// Per-face record of what was accumulated, kept for inspection and tests.
#[derive(Debug, Clone)]
pub struct FaceElement {
    /// Face index in the source mesh.
    pub face: usize,
    /// 3x3 element stiffness of the transformed triangle.
    pub stiffness: [[f64; 3]; 3],
    /// Sign applied to this face's image area contribution.
    pub sign: f64,
    /// Whether the face's coefficient is reversing (|mu| > 1 or mu = inf).
    pub reversed: bool,
}

/// Assembled symmetric system M = diag(L, L) - 2 A.
#[derive(Debug, Clone)]
pub struct SparseSymmetricSystem {
    n_vertices: usize,
    mode: Mode,
    matrix: CooMatrix,
    elements: Vec<FaceElement>,
}

impl SparseSymmetricSystem {
    /// Number of scalar unknowns, 2 |V|.
    pub fn dimension(&self) -> usize {
        2 * self.n_vertices
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn matrix(&self) -> &CooMatrix {
        &self.matrix
    }

    pub fn elements(&self) -> &[FaceElement] {
        &self.elements
    }

    /// x^T M x for stacked x = (u; v).
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.matrix.quadratic(x, x)
    }

    /// The discrete energy 0.5 x^T M x.
    pub fn energy(&self, x: &[f64]) -> f64 {
        0.5 * self.quadratic_form(x)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.matvec(x)
    }

    pub fn to_matrix_market(&self) -> String {
        self.matrix.to_matrix_market()
    }
}

/// Signed image area of a face as a bilinear form in the per-corner image
/// coordinates: u^T C v with C antisymmetric.
const AREA_FORM: [[f64; 3]; 3] = [[0.0, 0.5, -0.5], [-0.5, 0.0, 0.5], [0.5, -0.5, 0.0]];

/// Applies the inverse coefficient transform to a triangle.
///
/// The coefficient is reduced to the non-reversing side first; the returned
/// flag records whether that reduction happened. The transform has unit
/// determinant, so the signed area is preserved.
pub fn transformed_triangle(tri: [Point; 3], mu: Mu) -> Result<([Point; 3], bool), CoeffError> {
    let (reduced, reversed) = reduce_coefficient(mu)?;
    let p_inv = mu_to_p_inv(reduced)?;
    let mut out = [[0.0; 2]; 3];
    for (dst, src) in out.iter_mut().zip(tri.iter()) {
        dst[0] = p_inv[0][0] * src[0] + p_inv[0][1] * src[1];
        dst[1] = p_inv[1][0] * src[0] + p_inv[1][1] * src[1];
    }
    let area = tri_area(out[0], out[1], out[2]);
    if area == 0.0 || !area.is_finite() {
        return Err(CoeffError::DegenerateTriangle { area });
    }
    Ok((out, reversed))
}

/// Element stiffness of a triangle: K_ab = (e_a . e_b) / (4 |area|) with e_a
/// the edge opposite corner a. Rows sum to zero and the form u^T K u equals
/// the Dirichlet energy of the linear interpolant of u over the triangle.
pub fn cotangent_weights(tri: [Point; 3]) -> Result<[[f64; 3]; 3], CoeffError> {
    let area = tri_area(tri[0], tri[1], tri[2]);
    if area == 0.0 || !area.is_finite() {
        return Err(CoeffError::DegenerateTriangle { area });
    }
    let mut edges = [[0.0; 2]; 3];
    for a in 0..3 {
        let b = tri[(a + 1) % 3];
        let c = tri[(a + 2) % 3];
        edges[a] = [c[0] - b[0], c[1] - b[1]];
    }
    let scale = 1.0 / (4.0 * area.abs());
    let mut k = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            k[a][b] = scale * (edges[a][0] * edges[b][0] + edges[a][1] * edges[b][1]);
        }
    }
    Ok(k)
}

fn face_points_of(positions: &[Point], face: [usize; 3]) -> [Point; 3] {
    [positions[face[0]], positions[face[1]], positions[face[2]]]
}

fn check_field_length(n_faces: usize, field: &BeltramiField) -> Result<(), AssemblyError> {
    if field.len() != n_faces {
        return Err(AssemblyError::FieldLength {
            expected: n_faces,
            got: field.len(),
        });
    }
    Ok(())
}

struct FaceContribution {
    stiffness: [[f64; 3]; 3],
    sign: f64,
    reversed: bool,
}

fn face_contribution(
    positions: &[Point],
    face: [usize; 3],
    face_index: usize,
    mu: Mu,
    mode: Mode,
) -> Result<FaceContribution, AssemblyError> {
    let tri = face_points_of(positions, face);
    let area = tri_area(tri[0], tri[1], tri[2]);
    if area == 0.0 || !area.is_finite() {
        return Err(AssemblyError::DegenerateFace {
            face: face_index,
            area,
        });
    }
    let (prime, reversed) = transformed_triangle(tri, mu).map_err(|source| AssemblyError::Coeff {
        face: face_index,
        source,
    })?;
    let stiffness = cotangent_weights(prime).map_err(|source| AssemblyError::Coeff {
        face: face_index,
        source,
    })?;
    let orientation = if area < 0.0 { -1.0 } else { 1.0 };
    let sign = match mode {
        Mode::Signed => orientation,
        Mode::Generalized => {
            if reversed {
                -orientation
            } else {
                orientation
            }
        }
    };
    Ok(FaceContribution {
        stiffness,
        sign,
        reversed,
    })
}

pub(crate) fn assemble_laplacian_on(
    positions: &[Point],
    faces: &[[usize; 3]],
    field: &BeltramiField,
) -> Result<CooMatrix, AssemblyError> {
    check_field_length(faces.len(), field)?;
    let mut triplets = Vec::with_capacity(faces.len() * 9);
    for (f, &face) in faces.iter().enumerate() {
        let contrib = face_contribution(positions, face, f, field.mus()[f], Mode::Signed)?;
        for a in 0..3 {
            for b in 0..3 {
                triplets.push((face[a], face[b], contrib.stiffness[a][b]));
            }
        }
    }
    Ok(CooMatrix::from_triplets(
        positions.len(),
        positions.len(),
        &triplets,
    ))
}

pub(crate) fn assemble_area_matrix_on(
    positions: &[Point],
    faces: &[[usize; 3]],
    field: &BeltramiField,
    mode: Mode,
) -> Result<CooMatrix, AssemblyError> {
    check_field_length(faces.len(), field)?;
    let n = positions.len();
    let mut triplets = Vec::with_capacity(faces.len() * 12);
    for (f, &face) in faces.iter().enumerate() {
        let contrib = face_contribution(positions, face, f, field.mus()[f], mode)?;
        for a in 0..3 {
            for b in 0..3 {
                let w = contrib.sign * AREA_FORM[a][b];
                if w != 0.0 {
                    triplets.push((face[a], n + face[b], 0.5 * w));
                    triplets.push((n + face[b], face[a], 0.5 * w));
                }
            }
        }
    }
    Ok(CooMatrix::from_triplets(2 * n, 2 * n, &triplets))
}

pub(crate) fn assemble_system_on(
    positions: &[Point],
    faces: &[[usize; 3]],
    field: &BeltramiField,
    mode: Mode,
) -> Result<SparseSymmetricSystem, AssemblyError> {
    check_field_length(faces.len(), field)?;
    let n = positions.len();
    let mut triplets = Vec::with_capacity(faces.len() * 30);
    let mut elements = Vec::with_capacity(faces.len());
    for (f, &face) in faces.iter().enumerate() {
        let contrib = face_contribution(positions, face, f, field.mus()[f], mode)?;
        for a in 0..3 {
            for b in 0..3 {
                let k = contrib.stiffness[a][b];
                triplets.push((face[a], face[b], k));
                triplets.push((n + face[a], n + face[b], k));
                let w = -contrib.sign * AREA_FORM[a][b];
                if w != 0.0 {
                    triplets.push((face[a], n + face[b], w));
                    triplets.push((n + face[b], face[a], w));
                }
            }
        }
        elements.push(FaceElement {
            face: f,
            stiffness: contrib.stiffness,
            sign: contrib.sign,
            reversed: contrib.reversed,
        });
    }
    Ok(SparseSymmetricSystem {
        n_vertices: n,
        mode,
        matrix: CooMatrix::from_triplets(2 * n, 2 * n, &triplets),
        elements,
    })
}

/// Cotangent Laplacian of the coefficient-transformed triangles, |V| x |V|.
///
/// Always uses the reduced (non-reversing) coefficient, so fields that agree
/// after reduction produce identical matrices.
pub fn assemble_laplacian(mesh: &TriMesh, field: &BeltramiField) -> Result<CooMatrix, AssemblyError> {
    assemble_laplacian_on(mesh.vertices(), mesh.faces(), field)
}

/// Image area form: x^T A x over stacked x = (u; v) sums each face's signed
/// image area, with the sign flipped on reversing faces in generalized mode.
pub fn assemble_area_matrix(
    mesh: &TriMesh,
    field: &BeltramiField,
    mode: Mode,
) -> Result<CooMatrix, AssemblyError> {
    assemble_area_matrix_on(mesh.vertices(), mesh.faces(), field, mode)
}

/// Full system M = diag(L, L) - 2 A for the given mode.
pub fn assemble_system(
    mesh: &TriMesh,
    field: &BeltramiField,
    mode: Mode,
) -> Result<SparseSymmetricSystem, AssemblyError> {
    assemble_system_on(mesh.vertices(), mesh.faces(), field, mode)
}
