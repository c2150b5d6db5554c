//! Fold configurations: the two-coloring of a mesh into forward and
//! reversing regions, the singular edges and vertices it induces, the
//! Kawasaki flat-foldability defect, distortion metrics, and the
//! straightening of folding lines.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coeff::{mu_of_map, BeltramiField, CoeffError, Mu};
use crate::mesh::{tri_area, MeshError, Point, TriMesh};

#[derive(Debug, Error)]
pub enum FoldError {
    #[error("coloring covers {got} faces but the mesh has {expected}")]
    Length { expected: usize, got: usize },
    #[error("face {face}: label {label} is not +1 or -1")]
    BadLabel { face: usize, label: i64 },
    #[error("vertex {vertex} is not an interior singular vertex")]
    NotSingular { vertex: usize },
    #[error("vertex {vertex}: odd number of singular sectors ({count}), coloring is inconsistent")]
    OddSectors { vertex: usize, count: usize },
    #[error("face {face}: {source}")]
    Coeff { face: usize, source: CoeffError },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Parse { path: String, msg: String },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Per-face labels in {+1, -1} over a mesh, together with the induced
/// singular edge set: the interior edges whose two faces carry different
/// labels. +1 marks forward (orientation-preserving) faces, -1 reversing
/// ones.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldColoring {
    labels: Vec<i8>,
    singular_edges: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct ColoringFile {
    #[serde(default = "format_version")]
    format: u32,
    faces: Vec<i64>,
}

fn format_version() -> u32 {
    1
}

impl FoldColoring {
    pub fn new(mesh: &TriMesh, labels: Vec<i8>) -> Result<Self, FoldError> {
        if labels.len() != mesh.n_faces() {
            return Err(FoldError::Length {
                expected: mesh.n_faces(),
                got: labels.len(),
            });
        }
        for (face, &l) in labels.iter().enumerate() {
            if l != 1 && l != -1 {
                return Err(FoldError::BadLabel {
                    face,
                    label: l as i64,
                });
            }
        }
        let mut by_edge: std::collections::BTreeMap<(usize, usize), Vec<usize>> =
            std::collections::BTreeMap::new();
        for (fi, f) in mesh.faces().iter().enumerate() {
            for k in 0..3 {
                let a = f[k];
                let b = f[(k + 1) % 3];
                by_edge.entry((a.min(b), a.max(b))).or_default().push(fi);
            }
        }
        let singular_edges = by_edge
            .into_iter()
            .filter(|(_, faces)| faces.len() == 2 && labels[faces[0]] != labels[faces[1]])
            .map(|(e, _)| e)
            .collect();
        Ok(FoldColoring {
            labels,
            singular_edges,
        })
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn label(&self, face: usize) -> i8 {
        self.labels[face]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Bichromatic interior edges as (low, high) vertex pairs, sorted.
    pub fn singular_edges(&self) -> &[(usize, usize)] {
        &self.singular_edges
    }

    /// The coefficient field prescribing an exact fold: 0 on forward faces,
    /// infinity on reversing ones.
    pub fn to_field(&self) -> BeltramiField {
        BeltramiField::from_mus(
            self.labels
                .iter()
                .map(|&l| if l > 0 { Mu::ZERO } else { Mu::Infinite })
                .collect(),
        )
    }

    pub fn to_json(&self) -> String {
        let file = ColoringFile {
            format: 1,
            faces: self.labels.iter().map(|&l| l as i64).collect(),
        };
        serde_json::to_string_pretty(&file).expect("coloring serialization cannot fail")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), FoldError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| FoldError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>, mesh: &TriMesh) -> Result<Self, FoldError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| FoldError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let file: ColoringFile =
            serde_json::from_str(&text).map_err(|e| FoldError::Parse {
                path: path.display().to_string(),
                msg: e.to_string(),
            })?;
        let mut labels = Vec::with_capacity(file.faces.len());
        for (face, &l) in file.faces.iter().enumerate() {
            if l != 1 && l != -1 {
                return Err(FoldError::BadLabel { face, label: l });
            }
            labels.push(l as i8);
        }
        FoldColoring::new(mesh, labels)
    }
}

/// Labels derived from a coefficient field: +1 where |mu| < 1, -1 where the
/// coefficient is reversing.
pub fn coloring_from_field(
    mesh: &TriMesh,
    field: &BeltramiField,
) -> Result<FoldColoring, FoldError> {
    if field.len() != mesh.n_faces() {
        return Err(FoldError::Length {
            expected: mesh.n_faces(),
            got: field.len(),
        });
    }
    let mut labels = Vec::with_capacity(field.len());
    for (face, &mu) in field.mus().iter().enumerate() {
        mu.check_admissible()
            .map_err(|source| FoldError::Coeff { face, source })?;
        labels.push(if mu.is_reversing() { -1 } else { 1 });
    }
    FoldColoring::new(mesh, labels)
}

/// Classification of a singular vertex by how many sectors the singular
/// edges cut its star into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexClass {
    /// Interior vertex whose star splits into exactly 2 sectors.
    Folding,
    /// Interior vertex with 2n > 2 sectors; carries n.
    Cusp(usize),
    /// Boundary vertex touched by a singular edge.
    FoldingEndpoint,
}

struct StarLabels {
    /// Ring indices of the spokes that are singular edges, in star order.
    singular_spokes: Vec<usize>,
    closed: bool,
    ring: Vec<usize>,
    faces: Vec<usize>,
}

fn star_labels(mesh: &TriMesh, coloring: &FoldColoring, v: usize) -> StarLabels {
    let star = mesh.star(v);
    let deg = star.faces.len();
    let mut singular_spokes = Vec::new();
    if star.closed {
        for k in 0..deg {
            let before = star.faces[(k + deg - 1) % deg];
            let after = star.faces[k];
            if coloring.label(before) != coloring.label(after) {
                singular_spokes.push(k);
            }
        }
    } else {
        // Spokes 0 and deg are boundary edges; only interior spokes can be
        // singular in a valid coloring.
        for k in 1..deg {
            if coloring.label(star.faces[k - 1]) != coloring.label(star.faces[k]) {
                singular_spokes.push(k);
            }
        }
    }
    StarLabels {
        singular_spokes,
        closed: star.closed,
        ring: star.ring,
        faces: star.faces,
    }
}

/// Classifies every singular vertex of the coloring; non-singular vertices
/// are omitted. Results are sorted by vertex index.
pub fn classify_singular_vertices(
    mesh: &TriMesh,
    coloring: &FoldColoring,
) -> Result<Vec<(usize, VertexClass)>, FoldError> {
    if coloring.len() != mesh.n_faces() {
        return Err(FoldError::Length {
            expected: mesh.n_faces(),
            got: coloring.len(),
        });
    }
    let mut out = Vec::new();
    for v in 0..mesh.n_vertices() {
        let star = star_labels(mesh, coloring, v);
        let count = star.singular_spokes.len();
        if count == 0 {
            continue;
        }
        if !star.closed {
            out.push((v, VertexClass::FoldingEndpoint));
        } else if !count.is_multiple_of(2) {
            return Err(FoldError::OddSectors { vertex: v, count });
        } else if count == 2 {
            out.push((v, VertexClass::Folding));
        } else {
            out.push((v, VertexClass::Cusp(count / 2)));
        }
    }
    Ok(out)
}

fn spoke_angle(verts: &[Point], v: usize, to: usize) -> f64 {
    let d = [verts[to][0] - verts[v][0], verts[to][1] - verts[v][1]];
    let a = d[1].atan2(d[0]);
    if a < 0.0 {
        a + std::f64::consts::TAU
    } else {
        a
    }
}

fn corner_angle(verts: &[Point], v: usize, a: usize, b: usize) -> f64 {
    let pa = [verts[a][0] - verts[v][0], verts[a][1] - verts[v][1]];
    let pb = [verts[b][0] - verts[v][0], verts[b][1] - verts[v][1]];
    let cross = pa[0] * pb[1] - pa[1] * pb[0];
    let dot = pa[0] * pb[0] + pa[1] * pb[1];
    cross.atan2(dot)
}

/// Alternating sum of the sector angles between consecutive singular
/// directions at an interior singular vertex, in radians. Sectors are taken
/// counterclockwise starting from the singular edge with the smallest angle
/// to the +x axis; the first sector enters negatively. A vanishing sum is
/// the local flat-foldability condition.
pub fn kawasaki_defect(
    mesh: &TriMesh,
    coloring: &FoldColoring,
    vertex: usize,
) -> Result<f64, FoldError> {
    let star = star_labels(mesh, coloring, vertex);
    if !star.closed || star.singular_spokes.is_empty() {
        return Err(FoldError::NotSingular { vertex });
    }
    let count = star.singular_spokes.len();
    if !count.is_multiple_of(2) {
        return Err(FoldError::OddSectors {
            vertex,
            count,
        });
    }
    let verts = mesh.vertices();
    let deg = star.faces.len();
    // Corner angle of face k, between spokes k and k + 1.
    let corners: Vec<f64> = (0..deg)
        .map(|k| corner_angle(verts, vertex, star.ring[k], star.ring[(k + 1) % deg]))
        .collect();
    let start_pos = (0..count)
        .min_by(|&i, &j| {
            let ai = spoke_angle(verts, vertex, star.ring[star.singular_spokes[i]]);
            let aj = spoke_angle(verts, vertex, star.ring[star.singular_spokes[j]]);
            ai.partial_cmp(&aj).expect("spoke angles are finite")
        })
        .expect("at least one singular spoke");
    let mut defect = 0.0;
    for i in 0..count {
        let from = star.singular_spokes[(start_pos + i) % count];
        let to = star.singular_spokes[(start_pos + i + 1) % count];
        let mut sector = 0.0;
        let mut k = from;
        while k != to {
            sector += corners[k];
            k = (k + 1) % deg;
        }
        let sign = if i % 2 == 0 { -1.0 } else { 1.0 };
        defect += sign * sector;
    }
    Ok(defect)
}

/// Largest per-face distortion of `image` against the coloring: |mu| on
/// faces labeled +1 and 1/|mu| on faces labeled -1. Zero means the image is
/// an exact flat fold; a sign-mismatched face yields infinity.
pub fn max_distortion(
    mesh: &TriMesh,
    image: &[Point],
    coloring: &FoldColoring,
) -> Result<f64, FoldError> {
    max_distortion_on(mesh.vertices(), mesh.faces(), image, coloring.labels())
}

pub(crate) fn max_distortion_on(
    positions: &[Point],
    faces: &[[usize; 3]],
    image: &[Point],
    labels: &[i8],
) -> Result<f64, FoldError> {
    if labels.len() != faces.len() {
        return Err(FoldError::Length {
            expected: faces.len(),
            got: labels.len(),
        });
    }
    let mut worst = 0.0f64;
    for (f, face) in faces.iter().enumerate() {
        let dom = [positions[face[0]], positions[face[1]], positions[face[2]]];
        let img = [image[face[0]], image[face[1]], image[face[2]]];
        let mu = mu_of_map(dom, img).map_err(|source| FoldError::Coeff { face: f, source })?;
        let m = mu.modulus();
        let d = if labels[f] > 0 { m } else { 1.0 / m };
        worst = worst.max(d);
    }
    Ok(worst)
}

/// Outcome of a straightening pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StraightenReport {
    /// Open folding-line chains found (closed loops are left alone).
    pub chains: usize,
    /// Interior chain vertices that were moved.
    pub moved: usize,
    /// Fraction of the full projection applied; 1.0 when no damping was
    /// needed, 0.0 when even the smallest step would invert a face.
    pub damping: f64,
}

/// Maximal chains of singular edges whose interior vertices have exactly two
/// singular spokes and sit in the mesh interior. Chains end at boundary
/// vertices, cusps, or branch points; closed loops are not returned.
fn folding_chains(mesh: &TriMesh, coloring: &FoldColoring) -> Vec<Vec<usize>> {
    use std::collections::{BTreeMap, BTreeSet};
    let mut adjacency: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(a, b) in coloring.singular_edges() {
        adjacency.entry(a).or_default().push(b);
        adjacency.entry(b).or_default().push(a);
    }
    let boundary = mesh.boundary_flags();
    let is_endpoint =
        |v: usize| boundary[v] || adjacency.get(&v).map(|n| n.len()).unwrap_or(0) != 2;
    let mut visited: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut chains = Vec::new();
    for (&v, neighbors) in &adjacency {
        if !is_endpoint(v) {
            continue;
        }
        for &w in neighbors {
            let key = (v.min(w), v.max(w));
            if !visited.insert(key) {
                continue;
            }
            let mut chain = vec![v, w];
            let (mut prev, mut cur) = (v, w);
            while !is_endpoint(cur) {
                let next = adjacency[&cur]
                    .iter()
                    .copied()
                    .find(|&n| n != prev)
                    .expect("interior chain vertex has two singular neighbors");
                visited.insert((cur.min(next), cur.max(next)));
                chain.push(next);
                prev = cur;
                cur = next;
            }
            chains.push(chain);
        }
    }
    chains
}

/// Projects the interior vertices of every open folding-line chain onto the
/// segment between the chain's endpoint positions, then damps the move by
/// halving until no face of positive area is inverted.
pub(crate) fn straighten_positions(
    mesh: &TriMesh,
    coloring: &FoldColoring,
    positions: &[Point],
) -> Result<(Vec<Point>, StraightenReport), FoldError> {
    if coloring.len() != mesh.n_faces() {
        return Err(FoldError::Length {
            expected: mesh.n_faces(),
            got: coloring.len(),
        });
    }
    let chains = folding_chains(mesh, coloring);
    let mut targets: Vec<(usize, Point)> = Vec::new();
    let mut used_chains = 0;
    for chain in &chains {
        if chain.len() < 3 {
            continue;
        }
        let a = positions[chain[0]];
        let b = positions[*chain.last().expect("chain is nonempty")];
        let ab = [b[0] - a[0], b[1] - a[1]];
        let len2 = ab[0] * ab[0] + ab[1] * ab[1];
        if len2 <= 0.0 {
            continue;
        }
        used_chains += 1;
        for &v in &chain[1..chain.len() - 1] {
            let p = positions[v];
            let t = ((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2;
            let t = t.clamp(0.0, 1.0);
            targets.push((v, [a[0] + t * ab[0], a[1] + t * ab[1]]));
        }
    }

    let positive_before: Vec<bool> = mesh
        .faces()
        .iter()
        .map(|&[i, j, k]| tri_area(positions[i], positions[j], positions[k]) > 0.0)
        .collect();
    let keeps_orientation = |candidate: &[Point]| {
        mesh.faces().iter().enumerate().all(|(f, &[i, j, k])| {
            !positive_before[f] || tri_area(candidate[i], candidate[j], candidate[k]) > 0.0
        })
    };

    let mut damping = 1.0;
    let mut out = positions.to_vec();
    if !targets.is_empty() {
        let mut accepted = false;
        for _ in 0..=40 {
            let mut candidate = positions.to_vec();
            for &(v, target) in &targets {
                candidate[v] = [
                    positions[v][0] + damping * (target[0] - positions[v][0]),
                    positions[v][1] + damping * (target[1] - positions[v][1]),
                ];
            }
            if keeps_orientation(&candidate) {
                out = candidate;
                accepted = true;
                break;
            }
            damping *= 0.5;
        }
        if !accepted {
            damping = 0.0;
        }
    }
    Ok((
        out,
        StraightenReport {
            chains: used_chains,
            moved: targets.len(),
            damping,
        },
    ))
}

/// Straightens the folding lines of a valid mesh, returning the moved mesh
/// and a report of how much of the projection was applied.
pub fn straighten_folding_lines(
    mesh: &TriMesh,
    coloring: &FoldColoring,
) -> Result<(TriMesh, StraightenReport), FoldError> {
    let (positions, report) = straighten_positions(mesh, coloring, mesh.vertices())?;
    let out = mesh.with_positions(positions)?;
    Ok((out, report))
}
