//! Planar triangle meshes: validated construction, OBJ input/output, signed
//! areas, boundary loops, and positional pin sets.
//!
//! A [`TriMesh`] is by construction a consistently oriented, edge-connected,
//! manifold triangulation with strictly positive face areas. Folded images of
//! a mesh (which invert faces) are carried as plain position slices next to
//! their domain mesh and never become `TriMesh` values themselves.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use thiserror::Error;

/// A point in the plane.
pub type Point = [f64; 2];

/// Signed area of the triangle `(a, b, c)`.
pub fn tri_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("io error for {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("{path}:{line}: vertex has z = {z:e}; meshes must be planar (|z| <= 1e-9)")]
    NonPlanar { path: String, line: usize, z: f64 },
    #[error("invalid mesh:\n{0}")]
    Invalid(ValidationReport),
    #[error("pin set: {0}")]
    BadPins(String),
}

/// Outcome of [`validate`]: an empty violation list means the mesh is valid.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            write!(f, "ok")
        } else {
            for (i, v) in self.violations.iter().enumerate() {
                if i > 0 {
                    writeln!(f)?;
                }
                write!(f, "- {v}")?;
            }
            Ok(())
        }
    }
}

/// Unvalidated mesh data, as parsed from a file or assembled by a generator.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMesh {
    pub vertices: Vec<Point>,
    pub faces: Vec<[usize; 3]>,
}

impl RawMesh {
    pub fn validate(&self) -> ValidationReport {
        validate_parts(&self.vertices, &self.faces)
    }

    pub fn into_mesh(self) -> Result<TriMesh, MeshError> {
        let report = self.validate();
        if report.is_ok() {
            Ok(TriMesh {
                vertices: self.vertices,
                faces: self.faces,
            })
        } else {
            Err(MeshError::Invalid(report))
        }
    }
}

/// A validated planar triangle mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Point>,
    faces: Vec<[usize; 3]>,
}

impl TriMesh {
    /// Builds a mesh, rejecting input that violates any structural invariant:
    /// out-of-range or repeated indices, non-positive face areas, inconsistent
    /// orientation, non-manifold edges or vertices, disconnected components,
    /// or unreferenced vertices.
    pub fn new(vertices: Vec<Point>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        RawMesh { vertices, faces }.into_mesh()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// The three corner points of face `f`.
    pub fn face_points(&self, f: usize) -> [Point; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// The corners of face `f` under an alternative embedding.
    pub fn face_points_in(&self, positions: &[Point], f: usize) -> [Point; 3] {
        let [a, b, c] = self.faces[f];
        [positions[a], positions[b], positions[c]]
    }

    /// Same connectivity with replaced vertex positions, re-validated.
    pub fn with_positions(&self, positions: Vec<Point>) -> Result<Self, MeshError> {
        if positions.len() != self.vertices.len() {
            return Err(MeshError::Invalid(ValidationReport {
                violations: vec![format!(
                    "position count {} does not match vertex count {}",
                    positions.len(),
                    self.vertices.len()
                )],
            }));
        }
        TriMesh::new(positions, self.faces.clone())
    }

    /// `true` for every vertex lying on the boundary.
    pub fn boundary_flags(&self) -> Vec<bool> {
        let mut flags = vec![false; self.vertices.len()];
        for (a, b) in self.boundary_edges() {
            flags[a] = true;
            flags[b] = true;
        }
        flags
    }

    /// Directed boundary edges (tail, head), oriented with the domain on the
    /// left.
    pub fn boundary_edges(&self) -> Vec<(usize, usize)> {
        let mut directed = BTreeSet::new();
        for f in &self.faces {
            for k in 0..3 {
                directed.insert((f[k], f[(k + 1) % 3]));
            }
        }
        directed
            .iter()
            .filter(|(a, b)| !directed.contains(&(*b, *a)))
            .copied()
            .collect()
    }

    /// Boundary loops as cyclic vertex lists, each traversed with the domain
    /// on the left (counterclockwise for outer loops).
    pub fn boundary_loops(&self) -> Vec<Vec<usize>> {
        let edges = self.boundary_edges();
        let mut next: BTreeMap<usize, usize> = BTreeMap::new();
        for (a, b) in &edges {
            next.insert(*a, *b);
        }
        let mut seen = BTreeSet::new();
        let mut loops = Vec::new();
        for (start, _) in &edges {
            if seen.contains(start) {
                continue;
            }
            let mut cycle = Vec::new();
            let mut v = *start;
            loop {
                cycle.push(v);
                seen.insert(v);
                v = next[&v];
                if v == *start {
                    break;
                }
            }
            loops.push(cycle);
        }
        loops
    }

    /// The fan of faces and ring of neighbor vertices around `v`, ordered
    /// counterclockwise. For an interior vertex the star is closed: face `i`
    /// spans ring vertices `i` and `i + 1 (mod deg)`. For a boundary vertex it
    /// is open, with `faces.len() + 1 == ring.len()`.
    pub fn star(&self, v: usize) -> VertexStar {
        // Wedge (a -> b) for face (v, a, b); consecutive faces share ring
        // vertices, so the fan is a chain through the wedge map.
        let mut wedge: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        for (fi, f) in self.faces.iter().enumerate() {
            if let Some(k) = f.iter().position(|&x| x == v) {
                let a = f[(k + 1) % 3];
                let b = f[(k + 2) % 3];
                wedge.insert(a, (b, fi));
            }
        }
        let ends: BTreeSet<usize> = wedge.values().map(|&(b, _)| b).collect();
        let start = wedge
            .keys()
            .find(|a| !ends.contains(a))
            .copied()
            .unwrap_or_else(|| *wedge.keys().next().expect("vertex with no faces"));
        let closed = wedge.keys().all(|a| ends.contains(a));
        let mut ring = vec![start];
        let mut faces = Vec::new();
        let mut cur = start;
        while let Some(&(b, fi)) = wedge.get(&cur) {
            faces.push(fi);
            if closed && b == start {
                break;
            }
            ring.push(b);
            cur = b;
            if faces.len() > wedge.len() {
                break;
            }
        }
        VertexStar {
            ring,
            faces,
            closed,
        }
    }
}

/// Ordered one-ring of a vertex, see [`TriMesh::star`].
#[derive(Debug, Clone)]
pub struct VertexStar {
    pub ring: Vec<usize>,
    pub faces: Vec<usize>,
    pub closed: bool,
}

/// Total signed area of the mesh under the given embedding.
pub fn signed_area(mesh: &TriMesh, embedding: &[Point]) -> f64 {
    mesh.faces()
        .iter()
        .map(|&[i, j, k]| tri_area(embedding[i], embedding[j], embedding[k]))
        .sum()
}

/// Checks every structural invariant and reports all violations found.
pub fn validate(mesh: &TriMesh) -> ValidationReport {
    validate_parts(&mesh.vertices, &mesh.faces)
}

fn validate_parts(vertices: &[Point], faces: &[[usize; 3]]) -> ValidationReport {
    let mut violations = Vec::new();
    let nv = vertices.len();

    for (i, p) in vertices.iter().enumerate() {
        if !p[0].is_finite() || !p[1].is_finite() {
            violations.push(format!("vertex {i}: non-finite coordinates"));
        }
    }

    let mut indices_ok = true;
    for (fi, f) in faces.iter().enumerate() {
        if f.iter().any(|&v| v >= nv) {
            violations.push(format!(
                "face {fi}: vertex index out of bounds (indices {f:?}, {nv} vertices)"
            ));
            indices_ok = false;
        } else if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
            violations.push(format!("face {fi}: repeated vertex indices {f:?}"));
            indices_ok = false;
        }
    }
    if !indices_ok {
        // Geometry and topology checks assume well-formed indices.
        return ValidationReport { violations };
    }

    let mut total_area = 0.0;
    for (fi, &[a, b, c]) in faces.iter().enumerate() {
        let area = tri_area(vertices[a], vertices[b], vertices[c]);
        total_area += area;
        if area.is_nan() || area <= 0.0 {
            violations.push(format!("face {fi}: non-positive signed area {area:e}"));
        }
    }

    // Edge bookkeeping: every directed edge once, every undirected interior
    // edge in both directions, no edge on more than two faces.
    let mut directed: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for f in faces {
        for k in 0..3 {
            *directed.entry((f[k], f[(k + 1) % 3])).or_insert(0) += 1;
        }
    }
    let mut undirected: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (&(a, b), &n) in &directed {
        if n > 1 {
            violations.push(format!(
                "edge ({a}, {b}): traversed {n} times in the same direction (inconsistent orientation)"
            ));
        }
        *undirected.entry((a.min(b), a.max(b))).or_insert(0) += n;
    }
    for (&(a, b), &n) in &undirected {
        if n > 2 {
            violations.push(format!("edge ({a}, {b}): shared by {n} faces"));
        }
    }

    let mut referenced = vec![false; nv];
    for f in faces {
        for &v in f {
            referenced[v] = true;
        }
    }
    for (v, r) in referenced.iter().enumerate() {
        if !r {
            violations.push(format!("vertex {v}: not referenced by any face"));
        }
    }

    // Edge-connectivity of the face graph.
    if !faces.is_empty() {
        let mut owner: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (fi, f) in faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                owner.entry((a.min(b), a.max(b))).or_default().push(fi);
            }
        }
        let mut parent: Vec<usize> = (0..faces.len()).collect();
        fn find(parent: &mut Vec<usize>, x: usize) -> usize {
            if parent[x] != x {
                let r = find(parent, parent[x]);
                parent[x] = r;
            }
            parent[x]
        }
        for fs in owner.values() {
            for w in fs.windows(2) {
                let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
                if a != b {
                    parent[a] = b;
                }
            }
        }
        let roots: BTreeSet<usize> = (0..faces.len()).map(|f| find(&mut parent, f)).collect();
        if roots.len() > 1 {
            violations.push(format!(
                "mesh is disconnected: {} edge-connected face components",
                roots.len()
            ));
        }
    }

    // Manifold vertices: the faces around each vertex form a single fan.
    for v in 0..nv {
        let mut wedge: BTreeMap<usize, usize> = BTreeMap::new();
        let mut n_wedges = 0usize;
        let mut dup = false;
        for f in faces {
            if let Some(k) = f.iter().position(|&x| x == v) {
                n_wedges += 1;
                if wedge.insert(f[(k + 1) % 3], f[(k + 2) % 3]).is_some() {
                    dup = true;
                }
            }
        }
        if n_wedges == 0 {
            continue;
        }
        if dup {
            // Already reported through the directed-edge counts.
            continue;
        }
        let ends: BTreeSet<usize> = wedge.values().copied().collect();
        let boundary_starts: Vec<usize> = wedge
            .keys()
            .filter(|a| !ends.contains(a))
            .copied()
            .collect();
        let start = boundary_starts
            .first()
            .copied()
            .unwrap_or_else(|| *wedge.keys().next().unwrap());
        let mut reached = 1usize;
        let mut cur = start;
        while let Some(&b) = wedge.get(&cur) {
            if b == start {
                break;
            }
            if !wedge.contains_key(&b) {
                break;
            }
            reached += 1;
            cur = b;
            if reached > n_wedges {
                break;
            }
        }
        if boundary_starts.len() > 1 || reached != n_wedges {
            violations.push(format!(
                "vertex {v}: incident faces do not form a single fan (non-manifold vertex)"
            ));
        }
    }

    // Orientation invariant: face areas sum to the boundary shoelace.
    if violations.is_empty() {
        let mesh = TriMesh {
            vertices: vertices.to_vec(),
            faces: faces.to_vec(),
        };
        let shoelace: f64 = mesh
            .boundary_loops()
            .iter()
            .map(|cycle| {
                let mut s = 0.0;
                for i in 0..cycle.len() {
                    let p = vertices[cycle[i]];
                    let q = vertices[cycle[(i + 1) % cycle.len()]];
                    s += 0.5 * (p[0] * q[1] - q[0] * p[1]);
                }
                s
            })
            .sum();
        let scale = total_area.abs().max(1.0);
        if (shoelace - total_area).abs() > 1e-10 * scale {
            violations.push(format!(
                "boundary orientation: face area sum {total_area} differs from boundary shoelace {shoelace}"
            ));
        }
    }

    ValidationReport { violations }
}

/// Reads an OBJ file without validating the mesh structure. Only `v` and `f`
/// directives are interpreted; vertices must satisfy `|z| <= 1e-9`.
pub fn load_raw(path: impl AsRef<Path>) -> Result<RawMesh, MeshError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| MeshError::Io {
        path: display.clone(),
        source,
    })?;
    parse_obj(&text, &display)
}

fn parse_obj(text: &str, path: &str) -> Result<RawMesh, MeshError> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let parse_err = |msg: String| MeshError::Parse {
            path: path.to_string(),
            line: line_no,
            msg,
        };
        match parts.next() {
            Some("v") => {
                let coords: Vec<f64> = parts
                    .clone()
                    .map(|t| t.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| parse_err(format!("bad vertex coordinate: {e}")))?;
                if coords.len() < 2 {
                    return Err(parse_err("vertex needs at least x and y".into()));
                }
                let z = coords.get(2).copied().unwrap_or(0.0);
                if z.abs() > 1e-9 {
                    return Err(MeshError::NonPlanar {
                        path: path.to_string(),
                        line: line_no,
                        z,
                    });
                }
                vertices.push([coords[0], coords[1]]);
            }
            Some("f") => {
                let refs: Vec<&str> = parts.collect();
                if refs.len() != 3 {
                    return Err(parse_err(format!(
                        "only triangle faces are supported (got {} vertices)",
                        refs.len()
                    )));
                }
                let mut idx = [0usize; 3];
                for (k, r) in refs.iter().enumerate() {
                    let head = r.split('/').next().unwrap_or("");
                    let i: i64 = head
                        .parse()
                        .map_err(|e| parse_err(format!("bad face index {head:?}: {e}")))?;
                    if i < 1 {
                        return Err(parse_err(format!(
                            "face index {i} must be positive (1-based)"
                        )));
                    }
                    idx[k] = (i - 1) as usize;
                }
                faces.push(idx);
            }
            // Other directives (vt, vn, o, g, s, usemtl, ...) are ignored.
            _ => {}
        }
    }
    Ok(RawMesh { vertices, faces })
}

/// Reads and validates a planar OBJ mesh.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriMesh, MeshError> {
    load_raw(path)?.into_mesh()
}

fn obj_string(vertices: &[Point], faces: &[[usize; 3]]) -> String {
    let mut out = String::new();
    for v in vertices {
        // `{}` prints the shortest decimal that parses back to the same f64,
        // so save/load round-trips are exact.
        out.push_str(&format!("v {} {} 0\n", v[0], v[1]));
    }
    for f in faces {
        out.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<(), MeshError> {
    std::fs::write(path, contents).map_err(|source| MeshError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes the mesh as OBJ. Coordinates round-trip exactly through
/// [`load_mesh`].
pub fn save_mesh(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    write_file(path.as_ref(), &obj_string(&mesh.vertices, &mesh.faces))
}

/// Writes the mesh connectivity with replaced vertex positions (for folded
/// images, which may invert faces and so are not `TriMesh` values).
pub fn save_embedding(
    mesh: &TriMesh,
    positions: &[Point],
    path: impl AsRef<Path>,
) -> Result<(), MeshError> {
    write_file(path.as_ref(), &obj_string(positions, &mesh.faces))
}

/// A positional constraint: vertex `vertex` is fixed to `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pin {
    pub vertex: usize,
    pub x: f64,
    pub y: f64,
}

impl Pin {
    pub fn target(&self) -> Point {
        [self.x, self.y]
    }
}

/// A set of pins with pairwise distinct vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PinSet(Vec<Pin>);

impl PinSet {
    pub fn new(pins: Vec<Pin>) -> Result<Self, MeshError> {
        let mut seen = BTreeSet::new();
        for p in &pins {
            if !seen.insert(p.vertex) {
                return Err(MeshError::BadPins(format!(
                    "vertex {} pinned more than once",
                    p.vertex
                )));
            }
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(MeshError::BadPins(format!(
                    "vertex {}: non-finite target",
                    p.vertex
                )));
            }
        }
        Ok(PinSet(pins))
    }

    pub fn from_targets(targets: impl IntoIterator<Item = (usize, Point)>) -> Result<Self, MeshError> {
        PinSet::new(
            targets
                .into_iter()
                .map(|(vertex, p)| Pin {
                    vertex,
                    x: p[0],
                    y: p[1],
                })
                .collect(),
        )
    }

    pub fn pins(&self) -> &[Pin] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Checks that the set can constrain a solve on `mesh`: at least two pins,
    /// all vertex indices in range.
    pub fn check_against(&self, mesh: &TriMesh) -> Result<(), MeshError> {
        if self.0.len() < 2 {
            return Err(MeshError::BadPins(format!(
                "at least 2 pins are required (got {})",
                self.0.len()
            )));
        }
        for p in &self.0 {
            if p.vertex >= mesh.n_vertices() {
                return Err(MeshError::BadPins(format!(
                    "pin references vertex {} but the mesh has {} vertices",
                    p.vertex,
                    mesh.n_vertices()
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MeshError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| MeshError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let pins: Vec<Pin> = serde_json::from_str(&text)
            .map_err(|e| MeshError::BadPins(format!("{}: {e}", path.display())))?;
        PinSet::new(pins)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MeshError> {
        let text = serde_json::to_string_pretty(&self.0).expect("pin serialization");
        write_file(path.as_ref(), &text)
    }
}
