//! Structured and randomized planar mesh generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::{Point, TriMesh};

/// Axis-aligned rectangle `[0, width] x [0, height]` triangulated as an
/// `nx` by `ny` grid of quads, each split along the up-right diagonal.
pub fn rect_grid(nx: usize, ny: usize, width: f64, height: f64) -> TriMesh {
    assert!(nx >= 1 && ny >= 1, "grid needs at least one cell per axis");
    let id = |i: usize, j: usize| i * (nx + 1) + j;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for i in 0..=ny {
        for j in 0..=nx {
            vertices.push([width * j as f64 / nx as f64, height * i as f64 / ny as f64]);
        }
    }
    let mut faces = Vec::with_capacity(2 * nx * ny);
    for i in 0..ny {
        for j in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i, j + 1), id(i + 1, j + 1), id(i + 1, j));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    TriMesh::new(vertices, faces).expect("grid construction is valid")
}

/// Unit square `[0, 1]^2` as an `n` by `n` grid.
pub fn unit_square_grid(n: usize) -> TriMesh {
    rect_grid(n, n, 1.0, 1.0)
}

/// Unit disk triangulated with a center vertex, `rings` concentric rings and
/// `sectors` sectors.
pub fn disk(rings: usize, sectors: usize) -> TriMesh {
    assert!(rings >= 1 && sectors >= 3, "disk needs >= 1 ring and >= 3 sectors");
    let mut vertices: Vec<Point> = vec![[0.0, 0.0]];
    for r in 1..=rings {
        let radius = r as f64 / rings as f64;
        for s in 0..sectors {
            let th = std::f64::consts::TAU * s as f64 / sectors as f64;
            vertices.push([radius * th.cos(), radius * th.sin()]);
        }
    }
    let id = |r: usize, s: usize| 1 + (r - 1) * sectors + (s % sectors);
    let mut faces = Vec::new();
    for s in 0..sectors {
        faces.push([0, id(1, s), id(1, s + 1)]);
    }
    for r in 1..rings {
        for s in 0..sectors {
            let (a, b, c, d) = (id(r, s), id(r + 1, s), id(r + 1, s + 1), id(r, s + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    TriMesh::new(vertices, faces).expect("disk construction is valid")
}

/// A disk with interior vertices displaced by a deterministic jitter. The
/// jitter amount is relative to the ring spacing and is halved until the
/// perturbed mesh is valid.
pub fn jittered_disk(rings: usize, sectors: usize, jitter: f64, seed: u64) -> TriMesh {
    let base = disk(rings, sectors);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spacing = 1.0 / rings as f64;
    let boundary = base.boundary_flags();
    let offsets: Vec<Point> = (0..base.n_vertices())
        .map(|_| {
            [
                rng.gen_range(-1.0..1.0) * spacing,
                rng.gen_range(-1.0..1.0) * spacing,
            ]
        })
        .collect();
    let mut scale = jitter;
    for _ in 0..40 {
        let moved: Vec<Point> = base
            .vertices()
            .iter()
            .enumerate()
            .map(|(v, p)| {
                if boundary[v] {
                    *p
                } else {
                    [p[0] + scale * offsets[v][0], p[1] + scale * offsets[v][1]]
                }
            })
            .collect();
        if let Ok(mesh) = base.with_positions(moved) {
            return mesh;
        }
        scale *= 0.5;
    }
    base
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::signed_area;

    #[test]
    fn grid_has_expected_counts_and_area() {
        let m = rect_grid(4, 3, 2.0, 1.5);
        assert_eq!(m.n_vertices(), 20);
        assert_eq!(m.n_faces(), 24);
        assert!((signed_area(&m, m.vertices()) - 3.0).abs() <= 1e-12);
    }

    #[test]
    fn disk_is_valid_and_has_unit_radius_boundary() {
        let m = disk(3, 8);
        assert_eq!(m.n_vertices(), 1 + 3 * 8);
        let flags = m.boundary_flags();
        for (v, p) in m.vertices().iter().enumerate() {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert_eq!(flags[v], (r - 1.0).abs() <= 1e-12, "vertex {v}");
        }
    }

    #[test]
    fn jittered_disk_is_deterministic() {
        let a = jittered_disk(3, 9, 0.35, 42);
        let b = jittered_disk(3, 9, 0.35, 42);
        assert_eq!(a.vertices(), b.vertices());
        let c = jittered_disk(3, 9, 0.35, 43);
        assert_ne!(a.vertices(), c.vertices());
    }
}
