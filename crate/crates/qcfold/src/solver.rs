//! Pin-constrained solves of the assembled systems plus the scalar
//! diagnostics (energy, loss) used by the iteration drivers.
//!
//! Pins are hard constraints handled by elimination: pinned rows and columns
//! leave the system, their values move to the right-hand side, and the
//! reduced symmetric matrix is factorized with a sparse Bunch-Kaufman
//! decomposition, which tolerates the indefinite systems generalized mode
//! can produce. Every solve is followed by a mandatory residual check.

use std::env;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::prelude::Reborrow;
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, CholeskySymbolicParams};
use faer::sparse::linalg::SupernodalThreshold;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat, Par, Side};
use thiserror::Error;

use crate::assembly::{
    assemble_system_on, transformed_triangle, AssemblyError, Mode, SparseSymmetricSystem,
};
use crate::coeff::{mu_of_map, wirtinger_derivatives, BeltramiField, CoeffError, Mu};
use crate::foldconfig::FoldColoring;
use crate::mesh::{tri_area, MeshError, PinSet, Point, TriMesh};

/// Relative residual bound every solve must meet.
pub const SOLVE_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("face {face}: {source}")]
    Coeff { face: usize, source: CoeffError },
    #[error("factorization failed: {hint}")]
    Singular { hint: String },
    #[error("relative residual {residual:e} exceeds the solver tolerance {tol:e}")]
    Residual { residual: f64, tol: f64 },
    #[error("coloring covers {got} faces but the mesh has {expected}")]
    ColoringLength { expected: usize, got: usize },
    #[error("loss diverges: face {face} carries the opposite label to its image distortion")]
    LossDivergent { face: usize },
}

/// Output of a constrained solve.
#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Image position of every vertex.
    pub image: Vec<Point>,
    /// Relative residual of the reduced linear system.
    pub residual: f64,
    /// Energy of the solved map, per the system's mode.
    pub energy: f64,
    /// Per-face coefficient of the solved map, recovered from the geometry.
    pub mu: Vec<Mu>,
}

/// Parallelism setting read from QCFOLD_THREADS; anything other than an
/// integer above 1 means sequential. Sequential runs are bit-reproducible.
pub(crate) fn par_from_env() -> Par {
    match env::var("QCFOLD_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
    {
        Some(n) if n > 1 => Par::rayon(n),
        _ => Par::Seq,
    }
}

fn check_pins(n_vertices: usize, pins: &PinSet) -> Result<(), SolveError> {
    if pins.len() < 2 {
        return Err(MeshError::BadPins(format!(
            "at least 2 pins are required (got {})",
            pins.len()
        ))
        .into());
    }
    for p in pins.pins() {
        if p.vertex >= n_vertices {
            return Err(MeshError::BadPins(format!(
                "pin references vertex {} but the mesh has {} vertices",
                p.vertex, n_vertices
            ))
            .into());
        }
    }
    Ok(())
}

const SINGULAR_HINT: &str =
    "check that at least 2 pins land on distinct positions and that the mesh is edge-connected";

/// Eliminates the pinned unknowns, factorizes the reduced matrix, and
/// returns the full stacked solution together with its relative residual.
fn solve_pinned(sys: &SparseSymmetricSystem, pins: &PinSet) -> Result<(Vec<f64>, f64), SolveError> {
    let n = sys.n_vertices();
    let dim = sys.dimension();
    let mut fixed = vec![false; dim];
    let mut x = vec![0.0; dim];
    for p in pins.pins() {
        fixed[p.vertex] = true;
        fixed[n + p.vertex] = true;
        x[p.vertex] = p.x;
        x[n + p.vertex] = p.y;
    }

    let mut free_index = vec![usize::MAX; dim];
    let mut free = Vec::with_capacity(dim - 2 * pins.len());
    for (i, &is_fixed) in fixed.iter().enumerate() {
        if !is_fixed {
            free_index[i] = free.len();
            free.push(i);
        }
    }
    let nf = free.len();

    let mut rhs = vec![0.0; nf];
    let mut triplets: Vec<Triplet<usize, usize, f64>> = Vec::new();
    for &(i, j, v) in sys.matrix().entries() {
        if fixed[i] {
            continue;
        }
        let fi = free_index[i];
        if fixed[j] {
            rhs[fi] -= v * x[j];
        } else {
            triplets.push(Triplet::new(fi, free_index[j], v));
        }
    }
    let rhs_norm = rhs.iter().map(|b| b * b).sum::<f64>().sqrt();

    if nf > 0 {
        let par = par_from_env();
        let reduced = SparseColMat::try_new_from_triplets(nf, nf, &triplets).map_err(|e| {
            SolveError::Singular {
                hint: format!("building the reduced matrix failed: {e:?}"),
            }
        })?;
        // The supernodal path is forced: it is the variant with full
        // Bunch-Kaufman pivoting, which indefinite systems need.
        let sym = factorize_symbolic_cholesky(
            reduced.symbolic(),
            Side::Upper,
            Default::default(),
            CholeskySymbolicParams {
                supernodal_flop_ratio_threshold: SupernodalThreshold::FORCE_SUPERNODAL,
                ..Default::default()
            },
        )
        .map_err(|e| SolveError::Singular {
            hint: format!("symbolic analysis failed: {e:?}"),
        })?;
        let mut values = vec![0.0f64; sym.len_val()];
        let mut subdiag = vec![0.0f64; nf];
        let mut perm_fwd = vec![0usize; nf];
        let mut perm_inv = vec![0usize; nf];
        let mut buf = MemBuffer::new(
            sym.factorize_numeric_intranode_lblt_scratch::<f64>(par, Default::default()),
        );
        let lblt = sym.factorize_numeric_intranode_lblt(
            &mut values,
            &mut subdiag,
            &mut perm_fwd,
            &mut perm_inv,
            reduced.rb(),
            Side::Upper,
            par,
            MemStack::new(&mut buf),
            Default::default(),
        );
        let mut sol = Mat::<f64>::zeros(nf, 1);
        for (k, &b) in rhs.iter().enumerate() {
            sol[(k, 0)] = b;
        }
        let mut sbuf = MemBuffer::new(sym.solve_in_place_scratch::<f64>(1, par));
        lblt.solve_in_place_with_conj(Conj::No, sol.as_mut(), par, MemStack::new(&mut sbuf));
        for (k, &gi) in free.iter().enumerate() {
            x[gi] = sol[(k, 0)];
        }

        // A few rounds of iterative refinement with the existing
        // factorization recover the digits lost to pivot growth on badly
        // conditioned geometries.
        if x.iter().all(|v| v.is_finite()) {
            let mut best = free_residual(sys, &x, &free) / rhs_norm.max(1.0);
            for _ in 0..3 {
                if best <= 0.01 * SOLVE_TOL {
                    break;
                }
                let mx = sys.matvec(&x);
                for (k, &gi) in free.iter().enumerate() {
                    sol[(k, 0)] = -mx[gi];
                }
                lblt.solve_in_place_with_conj(
                    Conj::No,
                    sol.as_mut(),
                    par,
                    MemStack::new(&mut sbuf),
                );
                let prev: Vec<f64> = free.iter().map(|&gi| x[gi]).collect();
                for (k, &gi) in free.iter().enumerate() {
                    x[gi] += sol[(k, 0)];
                }
                let refined = free_residual(sys, &x, &free) / rhs_norm.max(1.0);
                if refined < best {
                    best = refined;
                } else {
                    for (k, &gi) in free.iter().enumerate() {
                        x[gi] = prev[k];
                    }
                    break;
                }
            }
        }
    }

    if x.iter().any(|v| !v.is_finite()) {
        return Err(SolveError::Singular {
            hint: SINGULAR_HINT.to_string(),
        });
    }

    let residual = free_residual(sys, &x, &free) / rhs_norm.max(1.0);
    if residual.is_nan() || residual > SOLVE_TOL {
        return Err(SolveError::Residual {
            residual,
            tol: SOLVE_TOL,
        });
    }
    Ok((x, residual))
}

fn free_residual(sys: &SparseSymmetricSystem, x: &[f64], free: &[usize]) -> f64 {
    let mx = sys.matvec(x);
    free.iter().map(|&i| mx[i] * mx[i]).sum::<f64>().sqrt()
}

pub(crate) fn lsqc_solve_on(
    positions: &[Point],
    faces: &[[usize; 3]],
    field: &BeltramiField,
    pins: &PinSet,
    mode: Mode,
) -> Result<SolveResult, SolveError> {
    check_pins(positions.len(), pins)?;
    let sys = assemble_system_on(positions, faces, field, mode)?;
    let (x, residual) = solve_pinned(&sys, pins)?;
    let n = positions.len();
    let image: Vec<Point> = (0..n).map(|i| [x[i], x[n + i]]).collect();
    let energy = energy_on(positions, faces, field, mode, &image)?;
    let mut mu = Vec::with_capacity(faces.len());
    for (f, face) in faces.iter().enumerate() {
        let dom = [positions[face[0]], positions[face[1]], positions[face[2]]];
        let img = [image[face[0]], image[face[1]], image[face[2]]];
        mu.push(mu_of_map(dom, img).map_err(|source| SolveError::Coeff { face: f, source })?);
    }
    Ok(SolveResult {
        image,
        residual,
        energy,
        mu,
    })
}

/// Solves the pin-constrained system for the given mesh, field, and mode.
///
/// With a non-reversing field the result is the energy minimizer; with
/// reversing faces in generalized mode it is the stationary point of the
/// sign-split energy. Pinned vertices land exactly on their targets.
pub fn lsqc_solve(
    mesh: &TriMesh,
    field: &BeltramiField,
    pins: &PinSet,
    mode: Mode,
) -> Result<SolveResult, SolveError> {
    pins.check_against(mesh)?;
    lsqc_solve_on(mesh.vertices(), mesh.faces(), field, pins, mode)
}

pub(crate) fn energy_on(
    positions: &[Point],
    faces: &[[usize; 3]],
    field: &BeltramiField,
    mode: Mode,
    image: &[Point],
) -> Result<f64, SolveError> {
    if field.len() != faces.len() {
        return Err(AssemblyError::FieldLength {
            expected: faces.len(),
            got: field.len(),
        }
        .into());
    }
    let mut total = 0.0;
    for (f, face) in faces.iter().enumerate() {
        let dom = [positions[face[0]], positions[face[1]], positions[face[2]]];
        let img = [image[face[0]], image[face[1]], image[face[2]]];
        let (prime, reversed) =
            transformed_triangle(dom, field.mus()[f]).map_err(|source| SolveError::Coeff {
                face: f,
                source,
            })?;
        let (fz, fzbar) =
            wirtinger_derivatives(prime, img).map_err(|source| SolveError::Coeff {
                face: f,
                source,
            })?;
        let anti = matches!(mode, Mode::Generalized) && reversed;
        let r = if anti { fz } else { fzbar };
        let area = tri_area(prime[0], prime[1], prime[2]).abs();
        total += area * r.norm_sqr();
    }
    Ok(total)
}

/// Residual energy of `image` as a map from the coefficient-transformed
/// mesh: the conformality defect integrated over every face in signed mode,
/// with reversing faces switched to the anti-conformality defect in
/// generalized mode. Zero exactly at solutions of the field's equation.
pub fn energy(
    mesh: &TriMesh,
    image: &[Point],
    field: &BeltramiField,
    mode: Mode,
) -> Result<f64, SolveError> {
    energy_on(mesh.vertices(), mesh.faces(), field, mode, image)
}

pub(crate) fn loss_on(
    positions: &[Point],
    faces: &[[usize; 3]],
    image: &[Point],
    labels: &[i8],
) -> Result<f64, SolveError> {
    if labels.len() != faces.len() {
        return Err(SolveError::ColoringLength {
            expected: faces.len(),
            got: labels.len(),
        });
    }
    let mut total = 0.0;
    for (f, face) in faces.iter().enumerate() {
        let dom = [positions[face[0]], positions[face[1]], positions[face[2]]];
        let img = [image[face[0]], image[face[1]], image[face[2]]];
        let mu = mu_of_map(dom, img).map_err(|source| SolveError::Coeff { face: f, source })?;
        let m = mu.modulus();
        if labels[f] > 0 {
            if !m.is_finite() {
                return Err(SolveError::LossDivergent { face: f });
            }
            total += m * m;
        } else {
            if m == 0.0 {
                return Err(SolveError::LossDivergent { face: f });
            }
            // 1 / inf^2 underflows to exactly 0, which is the intended value.
            total += 1.0 / (m * m);
        }
    }
    Ok(total)
}

/// Scale-invariant distortion of `image` against the coloring:
/// `sum |mu|^2` over faces labeled +1 plus `sum 1/|mu|^2` over faces labeled
/// -1. Zero exactly when the image is a flat fold realizing the coloring.
pub fn loss(mesh: &TriMesh, image: &[Point], coloring: &FoldColoring) -> Result<f64, SolveError> {
    loss_on(mesh.vertices(), mesh.faces(), image, coloring.labels())
}

/// Two boundary vertices at maximal pairwise distance, each pinned to its
/// current position. The far-apart choice keeps the constrained system well
/// conditioned.
pub fn default_pins(mesh: &TriMesh) -> Result<PinSet, MeshError> {
    let flags = mesh.boundary_flags();
    let verts = mesh.vertices();
    let boundary: Vec<usize> = (0..mesh.n_vertices()).filter(|&v| flags[v]).collect();
    if boundary.len() < 2 {
        return Err(MeshError::BadPins(
            "mesh has fewer than 2 boundary vertices".to_string(),
        ));
    }
    let mut best = (boundary[0], boundary[1], -1.0);
    for (k, &i) in boundary.iter().enumerate() {
        for &j in &boundary[k + 1..] {
            let dx = verts[i][0] - verts[j][0];
            let dy = verts[i][1] - verts[j][1];
            let d2 = dx * dx + dy * dy;
            if d2 > best.2 {
                best = (i, j, d2);
            }
        }
    }
    PinSet::from_targets([(best.0, verts[best.0]), (best.1, verts[best.1])])
}

/// The first boundary edge found scanning faces in index order. Fold solves
/// anchor on one edge because any exact fold maps a single face rigidly, so
/// pinning one edge at its own positions stays consistent with the folded
/// state; two far-apart pins generally do not, since a fold may bring them
/// together.
pub(crate) fn fold_anchor_edge(mesh: &TriMesh) -> Result<(usize, usize), MeshError> {
    let boundary: std::collections::BTreeSet<(usize, usize)> =
        mesh.boundary_edges().into_iter().collect();
    for f in mesh.faces() {
        for k in 0..3 {
            let e = (f[k], f[(k + 1) % 3]);
            if boundary.contains(&e) {
                return Ok(e);
            }
        }
    }
    Err(MeshError::BadPins(
        "mesh has no boundary edge to anchor a fold".to_string(),
    ))
}

/// Pins the endpoints of one boundary edge at their current positions, a
/// constraint every exact fold of the mesh can satisfy.
pub fn fold_edge_pins(mesh: &TriMesh) -> Result<PinSet, MeshError> {
    let (a, b) = fold_anchor_edge(mesh)?;
    let verts = mesh.vertices();
    PinSet::from_targets([(a, verts[a]), (b, verts[b])])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::Mode;
    use crate::coeff::third_vertex_image;
    use crate::foldconfig::FoldColoring;
    use crate::mesh::TriMesh;
    use crate::meshgen;
    use num_complex::Complex64;

    fn unit_square() -> TriMesh {
        TriMesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    fn self_pins(mesh: &TriMesh, vertices: &[usize]) -> PinSet {
        PinSet::from_targets(
            vertices
                .iter()
                .map(|&v| (v, mesh.vertices()[v]))
                .collect::<Vec<_>>(),
        )
        .unwrap()
    }

    #[test]
    fn conformal_solve_reproduces_identity() {
        let mesh = unit_square();
        let field = BeltramiField::uniform(Mu::ZERO, mesh.n_faces());
        let pins = self_pins(&mesh, &[0, 1]);
        let res = lsqc_solve(&mesh, &field, &pins, Mode::Signed).unwrap();
        for (p, q) in mesh.vertices().iter().zip(res.image.iter()) {
            assert!((p[0] - q[0]).abs() < 1e-9);
            assert!((p[1] - q[1]).abs() < 1e-9);
        }
        assert!(res.residual <= SOLVE_TOL);
        assert!(res.energy < 1e-18);
        assert!(res.mu.iter().all(|m| m.modulus() < 1e-9));
    }

    #[test]
    fn reversing_solve_reproduces_reflection() {
        let mesh = unit_square();
        let field = BeltramiField::uniform(Mu::Infinite, mesh.n_faces());
        let pins = self_pins(&mesh, &[0, 1]);
        let res = lsqc_solve(&mesh, &field, &pins, Mode::Generalized).unwrap();
        for (p, q) in mesh.vertices().iter().zip(res.image.iter()) {
            assert!((p[0] - q[0]).abs() < 1e-9);
            assert!((-p[1] - q[1]).abs() < 1e-9);
        }
        assert!(res.mu.iter().all(|m| m.is_reversing()));
    }

    #[test]
    fn split_field_folds_the_right_half_over() {
        let mesh = meshgen::rect_grid(2, 1, 1.0, 1.0);
        let field = BeltramiField::from_mus(vec![
            Mu::ZERO,
            Mu::ZERO,
            Mu::Infinite,
            Mu::Infinite,
        ]);
        let pins = self_pins(&mesh, &[0, 3]);
        let res = lsqc_solve(&mesh, &field, &pins, Mode::Generalized).unwrap();
        let expected = |p: Point| -> Point {
            if p[0] > 0.5 {
                [1.0 - p[0], p[1]]
            } else {
                p
            }
        };
        for (p, q) in mesh.vertices().iter().zip(res.image.iter()) {
            let e = expected(*p);
            assert!((e[0] - q[0]).abs() < 1e-8, "{p:?} mapped to {q:?}");
            assert!((e[1] - q[1]).abs() < 1e-8);
        }
    }

    #[test]
    fn one_triangle_solve_places_the_third_vertex() {
        for mu in [
            Mu::new(0.5, 0.0),
            Mu::new(-0.2, 0.35),
            Mu::new(1.8, -0.6),
            Mu::Infinite,
        ] {
            let p = [0.3, 0.8];
            let mesh = TriMesh::new(vec![[0.0, 0.0], [1.0, 0.0], p], vec![[0, 1, 2]]).unwrap();
            let field = BeltramiField::uniform(mu, 1);
            let pins = self_pins(&mesh, &[0, 1]);
            let res = lsqc_solve(&mesh, &field, &pins, Mode::Generalized).unwrap();
            let expected = third_vertex_image(mu, p).unwrap();
            assert!(
                (res.image[2][0] - expected[0]).abs() < 1e-9,
                "mu {mu:?}: got {:?}, want {expected:?}",
                res.image[2]
            );
            assert!((res.image[2][1] - expected[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_field_solve_recovers_the_affine_map() {
        let mu = Mu::new(0.3, 0.2);
        let mesh = meshgen::disk(3, 12);
        let field = BeltramiField::uniform(mu, mesh.n_faces());
        let targets: Vec<(usize, Point)> = [1usize, 1 + 2 * 12]
            .iter()
            .map(|&v| {
                (
                    v,
                    third_vertex_image(mu, mesh.vertices()[v]).unwrap(),
                )
            })
            .collect();
        let pins = PinSet::from_targets(targets).unwrap();
        let res = lsqc_solve(&mesh, &field, &pins, Mode::Signed).unwrap();
        for (p, q) in mesh.vertices().iter().zip(res.image.iter()) {
            let e = third_vertex_image(mu, *p).unwrap();
            assert!((e[0] - q[0]).abs() < 1e-9);
            assert!((e[1] - q[1]).abs() < 1e-9);
        }
        for m in &res.mu {
            match m {
                Mu::Finite(z) => {
                    assert!((z - Complex64::new(0.3, 0.2)).norm() < 1e-9);
                }
                Mu::Infinite => panic!("unexpected reversing face"),
            }
        }
    }

    #[test]
    fn repeated_solves_are_bitwise_identical() {
        let mesh = meshgen::jittered_disk(3, 11, 0.3, 5);
        let field = BeltramiField::uniform(Mu::new(0.25, -0.4), mesh.n_faces());
        let pins = default_pins(&mesh).unwrap();
        let a = lsqc_solve(&mesh, &field, &pins, Mode::Signed).unwrap();
        let b = lsqc_solve(&mesh, &field, &pins, Mode::Signed).unwrap();
        assert_eq!(a.image, b.image);
        assert_eq!(a.energy, b.energy);
    }

    #[test]
    fn solution_minimizes_the_signed_energy() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let mesh = meshgen::jittered_disk(2, 9, 0.25, 8);
        let field = BeltramiField::uniform(Mu::new(0.4, 0.1), mesh.n_faces());
        let pins = default_pins(&mesh).unwrap();
        let sys = crate::assembly::assemble_system(&mesh, &field, Mode::Signed).unwrap();
        let res = lsqc_solve(&mesh, &field, &pins, Mode::Signed).unwrap();
        let n = mesh.n_vertices();
        let mut x = vec![0.0; 2 * n];
        for (i, p) in res.image.iter().enumerate() {
            x[i] = p[0];
            x[n + i] = p[1];
        }
        let base = sys.energy(&x);
        let pinned: Vec<usize> = pins.pins().iter().map(|p| p.vertex).collect();
        for _ in 0..20 {
            let mut y = x.clone();
            for i in 0..n {
                if !pinned.contains(&i) {
                    y[i] += 0.1 * (rng.gen::<f64>() - 0.5);
                    y[n + i] += 0.1 * (rng.gen::<f64>() - 0.5);
                }
            }
            assert!(sys.energy(&y) >= base - 1e-10);
        }
    }

    #[test]
    fn generalized_solution_is_stationary() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(37);
        let mesh = meshgen::rect_grid(4, 2, 1.0, 0.5);
        let mut mus = vec![Mu::ZERO; mesh.n_faces()];
        for (f, m) in mus.iter_mut().enumerate() {
            if f >= mesh.n_faces() / 2 {
                *m = Mu::Infinite;
            }
        }
        let field = BeltramiField::from_mus(mus);
        let pins = self_pins(&mesh, &[0, 4]);
        let sys = crate::assembly::assemble_system(&mesh, &field, Mode::Generalized).unwrap();
        let res = lsqc_solve(&mesh, &field, &pins, Mode::Generalized).unwrap();
        let n = mesh.n_vertices();
        let mut x = vec![0.0; 2 * n];
        for (i, p) in res.image.iter().enumerate() {
            x[i] = p[0];
            x[n + i] = p[1];
        }
        let mx = sys.matvec(&x);
        let pinned: Vec<usize> = pins.pins().iter().map(|p| p.vertex).collect();
        for _ in 0..10 {
            let mut deriv = 0.0;
            for i in 0..n {
                if !pinned.contains(&i) {
                    deriv += (rng.gen::<f64>() - 0.5) * mx[i];
                    deriv += (rng.gen::<f64>() - 0.5) * mx[n + i];
                }
            }
            assert!(deriv.abs() < 1e-8);
        }
    }

    #[test]
    fn energy_examples_on_the_unit_square() {
        let mesh = unit_square();
        let identity: Vec<Point> = mesh.vertices().to_vec();
        let zero = BeltramiField::uniform(Mu::ZERO, mesh.n_faces());
        assert!(energy(&mesh, &identity, &zero, Mode::Signed).unwrap() < 1e-18);

        let inf = BeltramiField::uniform(Mu::Infinite, mesh.n_faces());
        let reflected: Vec<Point> = identity.iter().map(|p| [p[0], -p[1]]).collect();
        assert!(energy(&mesh, &reflected, &inf, Mode::Generalized).unwrap() < 1e-18);

        let e = energy(&mesh, &identity, &inf, Mode::Generalized).unwrap();
        assert!((e - 1.0).abs() < 1e-12, "identity against reversing field: {e}");
    }

    #[test]
    fn loss_examples() {
        let mesh = meshgen::rect_grid(2, 1, 1.0, 1.0);
        let coloring =
            FoldColoring::new(&mesh, vec![1, 1, -1, -1]).unwrap();
        let folded: Vec<Point> = mesh
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
        assert!(loss(&mesh, &folded, &coloring).unwrap() < 1e-16);

        let identity: Vec<Point> = mesh.vertices().to_vec();
        let err = loss(&mesh, &identity, &coloring).unwrap_err();
        match err {
            SolveError::LossDivergent { face } => assert_eq!(face, 2),
            other => panic!("unexpected error {other:?}"),
        }

        let all_plus = FoldColoring::new(&mesh, vec![1, 1, 1, 1]).unwrap();
        let sheared: Vec<Point> = mesh
            .vertices()
            .iter()
            .map(|p| [1.3 * p[0], 0.7 * p[1]])
            .collect();
        let l = loss(&mesh, &sheared, &all_plus).unwrap();
        assert!((l - 4.0 * 0.09).abs() < 1e-12);
    }

    #[test]
    fn default_pins_picks_a_diameter() {
        let mesh = unit_square();
        let pins = default_pins(&mesh).unwrap();
        let [a, b] = [pins.pins()[0].target(), pins.pins()[1].target()];
        let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        assert!((d - 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn single_pin_is_rejected() {
        let mesh = unit_square();
        let field = BeltramiField::uniform(Mu::ZERO, mesh.n_faces());
        let pins = self_pins(&mesh, &[0]);
        let err = lsqc_solve(&mesh, &field, &pins, Mode::Signed).unwrap_err();
        assert!(err.to_string().contains("at least 2 pins"));
    }
}
