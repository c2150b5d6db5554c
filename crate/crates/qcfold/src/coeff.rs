//! Beltrami coefficients on the extended plane and the matrix calculus
//! attached to them.
//!
//! A coefficient `mu` with `|mu| < 1` describes an orientation-preserving
//! quasiconformal distortion, `|mu| > 1` (up to `mu = inf`) an
//! orientation-reversing one. Values within `1e-6` of the unit circle are
//! inadmissible: there the governing equation degenerates.
//!
//! The matrices attached to a coefficient are
//!
//! ```text
//! A(mu) = 1/(1 - |mu|^2) * [ (rho - 1)^2 + tau^2    -2 tau              ]
//!                          [ -2 tau                 (1 + rho)^2 + tau^2 ]
//! ```
//!
//! with `rho = Re(mu)`, `tau = Im(mu)`, `det A = 1`, and its symmetric square
//! root `P` with `P^T P = A`, `det P = 1`, defined for `|mu| < 1`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

use crate::mesh::{tri_area, Point};

/// Width of the inadmissible band around the unit circle: `||mu| - 1|` below
/// this guard is rejected.
pub const UNIT_CIRCLE_GUARD: f64 = 1e-6;

/// Ratio threshold below which a derivative is considered to vanish when
/// measuring the coefficient of a map.
const INF_RATIO: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum CoeffError {
    #[error("|mu| = {modulus} lies within {UNIT_CIRCLE_GUARD:e} of the unit circle")]
    Equator { modulus: f64 },
    #[error("face {face}: {source}")]
    AtFace {
        face: usize,
        #[source]
        source: Box<CoeffError>,
    },
    #[error("P(mu) requires |mu| < 1 (got |mu| = {modulus}); reduce the coefficient first")]
    OutsideDisk { modulus: f64 },
    #[error("degenerate triangle (signed area {area:e})")]
    DegenerateTriangle { area: f64 },
    #[error("constant image triangle: the coefficient is undefined")]
    ConstantImage,
    #[error("metric determinant is {det}, expected 1 within 1e-9")]
    BadMetric { det: f64 },
    #[error("orientation sign must be +1 or -1 (got {0})")]
    BadSign(i8),
    #[error("Beltrami field: {0}")]
    BadField(String),
    #[error("field entry references face {face}, but the mesh has {n_faces} faces")]
    FaceOutOfRange { face: usize, n_faces: usize },
}

impl CoeffError {
    pub(crate) fn at_face(self, face: usize) -> CoeffError {
        CoeffError::AtFace {
            face,
            source: Box::new(self),
        }
    }
}

/// A Beltrami coefficient on the extended plane: a finite complex number or
/// the point at infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mu {
    Finite(Complex64),
    Infinite,
}

impl Mu {
    pub fn new(re: f64, im: f64) -> Self {
        Mu::Finite(Complex64::new(re, im))
    }

    pub const ZERO: Mu = Mu::Finite(Complex64::new(0.0, 0.0));

    pub fn modulus(self) -> f64 {
        match self {
            Mu::Finite(z) => z.norm(),
            Mu::Infinite => f64::INFINITY,
        }
    }

    /// `true` on the orientation-reversing side (`|mu| > 1` or infinite).
    pub fn is_reversing(self) -> bool {
        match self {
            Mu::Finite(z) => z.norm() > 1.0,
            Mu::Infinite => true,
        }
    }

    /// Rejects coefficients within [`UNIT_CIRCLE_GUARD`] of the unit circle.
    pub fn check_admissible(self) -> Result<(), CoeffError> {
        match self {
            Mu::Infinite => Ok(()),
            Mu::Finite(z) => {
                let m = z.norm();
                if (m - 1.0).abs() < UNIT_CIRCLE_GUARD {
                    Err(CoeffError::Equator { modulus: m })
                } else {
                    Ok(())
                }
            }
        }
    }
}

impl From<Complex64> for Mu {
    fn from(z: Complex64) -> Self {
        Mu::Finite(z)
    }
}

/// The distortion matrix `A(mu)` (see module docs); `A(inf) = -I`.
pub fn mu_to_a(mu: Mu) -> Result<[[f64; 2]; 2], CoeffError> {
    mu.check_admissible()?;
    match mu {
        Mu::Infinite => Ok([[-1.0, 0.0], [0.0, -1.0]]),
        Mu::Finite(z) => {
            let (rho, tau) = (z.re, z.im);
            let s = rho * rho + tau * tau;
            let d = 1.0 - s;
            Ok([
                [((rho - 1.0) * (rho - 1.0) + tau * tau) / d, -2.0 * tau / d],
                [-2.0 * tau / d, ((1.0 + rho) * (1.0 + rho) + tau * tau) / d],
            ])
        }
    }
}

/// The symmetric square root `P` of `A(mu)`, defined for `|mu| < 1`:
/// `P = 1/sqrt(1 - |mu|^2) * [[1 - rho, -tau], [-tau, 1 + rho]]`.
pub fn mu_to_p(mu: Mu) -> Result<[[f64; 2]; 2], CoeffError> {
    mu.check_admissible()?;
    let z = match mu {
        Mu::Finite(z) if z.norm() < 1.0 => z,
        _ => {
            return Err(CoeffError::OutsideDisk {
                modulus: mu.modulus(),
            })
        }
    };
    let (rho, tau) = (z.re, z.im);
    let r = (1.0 - (rho * rho + tau * tau)).sqrt();
    Ok([[(1.0 - rho) / r, -tau / r], [-tau / r, (1.0 + rho) / r]])
}

/// Inverse of [`mu_to_p`]:
/// `P^-1 = 1/sqrt(1 - |mu|^2) * [[1 + rho, tau], [tau, 1 - rho]]`.
pub fn mu_to_p_inv(mu: Mu) -> Result<[[f64; 2]; 2], CoeffError> {
    mu.check_admissible()?;
    let z = match mu {
        Mu::Finite(z) if z.norm() < 1.0 => z,
        _ => {
            return Err(CoeffError::OutsideDisk {
                modulus: mu.modulus(),
            })
        }
    };
    let (rho, tau) = (z.re, z.im);
    let r = (1.0 - (rho * rho + tau * tau)).sqrt();
    Ok([[(1.0 + rho) / r, tau / r], [tau / r, (1.0 - rho) / r]])
}

/// Maps a coefficient into the open unit disk: `|mu| < 1` stays put, while
/// `|mu| > 1` and `mu = inf` are sent to `1 / conj(mu)` with the `reversed`
/// flag set (`1 / conj(inf) = 0`).
pub fn reduce_coefficient(mu: Mu) -> Result<(Mu, bool), CoeffError> {
    mu.check_admissible()?;
    match mu {
        Mu::Infinite => Ok((Mu::ZERO, true)),
        Mu::Finite(z) => {
            if z.norm() < 1.0 {
                Ok((Mu::Finite(z), false))
            } else {
                Ok((Mu::Finite(z.conj().inv()), true))
            }
        }
    }
}

/// Wirtinger derivatives `(f_z, f_zbar)` of the affine map sending the
/// `domain` triangle to the `image` triangle, with the standard 1/2 scaling:
/// for Jacobian `[[a, b], [c, d]]`, `f_z = ((a + d) + i (c - b)) / 2` and
/// `f_zbar = ((a - d) + i (b + c)) / 2`.
pub fn wirtinger_derivatives(
    domain: [Point; 3],
    image: [Point; 3],
) -> Result<(Complex64, Complex64), CoeffError> {
    let area = tri_area(domain[0], domain[1], domain[2]);
    if area == 0.0 {
        return Err(CoeffError::DegenerateTriangle { area });
    }
    // Jacobian [[a, b], [c, d]] of the affine map, from the two edge vectors.
    let d1 = [domain[1][0] - domain[0][0], domain[1][1] - domain[0][1]];
    let d2 = [domain[2][0] - domain[0][0], domain[2][1] - domain[0][1]];
    let i1 = [image[1][0] - image[0][0], image[1][1] - image[0][1]];
    let i2 = [image[2][0] - image[0][0], image[2][1] - image[0][1]];
    let det = d1[0] * d2[1] - d2[0] * d1[1];
    let a = (i1[0] * d2[1] - i2[0] * d1[1]) / det;
    let b = (i2[0] * d1[0] - i1[0] * d2[0]) / det;
    let c = (i1[1] * d2[1] - i2[1] * d1[1]) / det;
    let d = (i2[1] * d1[0] - i1[1] * d2[0]) / det;
    let fz = Complex64::new(0.5 * (a + d), 0.5 * (c - b));
    let fzbar = Complex64::new(0.5 * (a - d), 0.5 * (b + c));
    Ok((fz, fzbar))
}

/// Beltrami coefficient `f_zbar / f_z` of the affine map sending the `domain`
/// triangle to the `image` triangle. Returns `Mu::Infinite` when `|f_z|`
/// vanishes relative to `|f_zbar|`, and an error for a constant image.
pub fn mu_of_map(domain: [Point; 3], image: [Point; 3]) -> Result<Mu, CoeffError> {
    let (fz, fzbar) = wirtinger_derivatives(domain, image)?;
    if fz.norm() == 0.0 && fzbar.norm() == 0.0 {
        return Err(CoeffError::ConstantImage);
    }
    if fz.norm() <= INF_RATIO * fzbar.norm() {
        return Ok(Mu::Infinite);
    }
    Ok(Mu::Finite(fzbar / fz))
}

/// Coefficient of a map whose pulled-back metric is the unit-determinant
/// symmetric matrix `g`, on the orientation branch `sign` (+1 preserving,
/// -1 reversing): `mu = (g11 - g22 + 2i g12) / (g11 + g22 + 2 sign)`.
/// On the reversing branch the denominator vanishes exactly for `g = I`,
/// which maps to `mu = inf`.
pub fn mu_from_metric(g: [[f64; 2]; 2], sign: i8) -> Result<Mu, CoeffError> {
    if sign != 1 && sign != -1 {
        return Err(CoeffError::BadSign(sign));
    }
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    if (det - 1.0).abs() > 1e-9 {
        return Err(CoeffError::BadMetric { det });
    }
    let num = Complex64::new(g[0][0] - g[1][1], 2.0 * g[0][1]);
    let den = g[0][0] + g[1][1] + 2.0 * f64::from(sign);
    // By AM-GM, g11 + g22 >= 2 sqrt(det) = 2, with equality only at g = I.
    if den.abs() < 1e-12 {
        return Ok(Mu::Infinite);
    }
    Ok(Mu::Finite(num / den))
}

/// Image of the third vertex of the normalized triangle `(0,0), (1,0), p`
/// under the affine solution with coefficient `mu` fixing the first two
/// vertices:
///
/// ```text
/// p' = [ 1   2 tau / D          ] p,   D = (1 + rho)^2 + tau^2,
///      [ 0   (1 - |mu|^2) / D   ]
/// ```
///
/// with `mu = inf` sending `(x, y)` to `(x, -y)`.
pub fn third_vertex_image(mu: Mu, p: Point) -> Result<Point, CoeffError> {
    mu.check_admissible()?;
    match mu {
        Mu::Infinite => Ok([p[0], -p[1]]),
        Mu::Finite(z) => {
            let (rho, tau) = (z.re, z.im);
            let s = rho * rho + tau * tau;
            let d = (1.0 + rho) * (1.0 + rho) + tau * tau;
            Ok([p[0] + 2.0 * tau / d * p[1], (1.0 - s) / d * p[1]])
        }
    }
}

/// A per-face Beltrami coefficient assignment over a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct BeltramiField {
    mus: Vec<Mu>,
}

#[derive(Serialize, Deserialize)]
struct FieldFile {
    #[serde(default = "default_format")]
    format: u32,
    faces: Vec<FieldEntry>,
}

fn default_format() -> u32 {
    1
}

#[derive(Serialize, Deserialize)]
struct FieldEntry {
    face: usize,
    mu: MuRepr,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MuRepr {
    Pair([f64; 2]),
    Name(String),
}

impl BeltramiField {
    pub fn uniform(mu: Mu, n_faces: usize) -> Self {
        BeltramiField {
            mus: vec![mu; n_faces],
        }
    }

    pub fn from_mus(mus: Vec<Mu>) -> Self {
        BeltramiField { mus }
    }

    pub fn mus(&self) -> &[Mu] {
        &self.mus
    }

    pub fn len(&self) -> usize {
        self.mus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mus.is_empty()
    }

    /// Checks every coefficient against the unit-circle guard, reporting the
    /// offending face.
    pub fn check_admissible(&self) -> Result<(), CoeffError> {
        for (face, mu) in self.mus.iter().enumerate() {
            mu.check_admissible().map_err(|e| e.at_face(face))?;
        }
        Ok(())
    }

    /// Reads the JSON form `{"faces": [{"face": i, "mu": [re, im]} | {"face":
    /// i, "mu": "inf"}, ...]}`. Faces not listed get `mu = 0`.
    pub fn load(path: impl AsRef<Path>, n_faces: usize) -> Result<Self, CoeffError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| CoeffError::BadField(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, n_faces)
    }

    pub fn from_json(text: &str, n_faces: usize) -> Result<Self, CoeffError> {
        let file: FieldFile =
            serde_json::from_str(text).map_err(|e| CoeffError::BadField(e.to_string()))?;
        let mut mus = vec![Mu::ZERO; n_faces];
        for entry in file.faces {
            if entry.face >= n_faces {
                return Err(CoeffError::FaceOutOfRange {
                    face: entry.face,
                    n_faces,
                });
            }
            mus[entry.face] = match entry.mu {
                MuRepr::Pair([re, im]) => Mu::new(re, im),
                MuRepr::Name(s) if s == "inf" => Mu::Infinite,
                MuRepr::Name(s) => {
                    return Err(CoeffError::BadField(format!(
                        "face {}: unknown mu value {s:?} (expected [re, im] or \"inf\")",
                        entry.face
                    )))
                }
            };
        }
        Ok(BeltramiField { mus })
    }

    pub fn to_json(&self) -> String {
        let faces: Vec<FieldEntry> = self
            .mus
            .iter()
            .enumerate()
            .map(|(face, mu)| FieldEntry {
                face,
                mu: match mu {
                    Mu::Finite(z) => MuRepr::Pair([z.re, z.im]),
                    Mu::Infinite => MuRepr::Name("inf".to_string()),
                },
            })
            .collect();
        serde_json::to_string_pretty(&FieldFile { format: 1, faces }).expect("field serialization")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CoeffError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json())
            .map_err(|e| CoeffError::BadField(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat_close(a: [[f64; 2]; 2], b: [[f64; 2]; 2], tol: f64) -> bool {
        (0..2).all(|i| (0..2).all(|j| (a[i][j] - b[i][j]).abs() <= tol))
    }

    fn det2(m: [[f64; 2]; 2]) -> f64 {
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    #[test]
    fn a_and_p_at_one_half() {
        let mu = Mu::new(0.5, 0.0);
        let a = mu_to_a(mu).unwrap();
        assert!(mat_close(a, [[1.0 / 3.0, 0.0], [0.0, 3.0]], 1e-15));
        let p = mu_to_p(mu).unwrap();
        assert!(mat_close(
            p,
            [[0.577_350_269_189_625_8, 0.0], [0.0, 1.732_050_807_568_877_2]],
            1e-12
        ));
        let pinv = mu_to_p_inv(mu).unwrap();
        assert!(mat_close(
            pinv,
            [[1.732_050_807_568_877_2, 0.0], [0.0, 0.577_350_269_189_625_8]],
            1e-12
        ));
    }

    #[test]
    fn p_squares_to_a_and_has_unit_determinant() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let r = 0.98 * rng.gen::<f64>();
            let th = std::f64::consts::TAU * rng.gen::<f64>();
            let mu = Mu::new(r * th.cos(), r * th.sin());
            let a = mu_to_a(mu).unwrap();
            let p = mu_to_p(mu).unwrap();
            let ptp = [
                [
                    p[0][0] * p[0][0] + p[1][0] * p[1][0],
                    p[0][0] * p[0][1] + p[1][0] * p[1][1],
                ],
                [
                    p[0][1] * p[0][0] + p[1][1] * p[1][0],
                    p[0][1] * p[0][1] + p[1][1] * p[1][1],
                ],
            ];
            assert!(mat_close(ptp, a, 1e-12));
            assert!((det2(a) - 1.0).abs() <= 1e-10);
            assert!((det2(p) - 1.0).abs() <= 1e-12);
            let pinv = mu_to_p_inv(mu).unwrap();
            let prod = [
                [
                    p[0][0] * pinv[0][0] + p[0][1] * pinv[1][0],
                    p[0][0] * pinv[0][1] + p[0][1] * pinv[1][1],
                ],
                [
                    p[1][0] * pinv[0][0] + p[1][1] * pinv[1][0],
                    p[1][0] * pinv[0][1] + p[1][1] * pinv[1][1],
                ],
            ];
            assert!(mat_close(prod, [[1.0, 0.0], [0.0, 1.0]], 1e-12));
        }
    }

    #[test]
    fn reduction_moves_reversing_coefficients_into_the_disk() {
        assert_eq!(
            reduce_coefficient(Mu::new(2.0, 0.0)).unwrap(),
            (Mu::new(0.5, 0.0), true)
        );
        assert_eq!(
            reduce_coefficient(Mu::Infinite).unwrap(),
            (Mu::ZERO, true)
        );
        assert_eq!(
            reduce_coefficient(Mu::new(0.3, 0.0)).unwrap(),
            (Mu::new(0.3, 0.0), false)
        );
    }

    #[test]
    fn reduction_negates_the_distortion_matrix() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let m = 1.0 + UNIT_CIRCLE_GUARD * 1.5 + rng.gen::<f64>() * 1e6;
            let th = std::f64::consts::TAU * rng.gen::<f64>();
            let mu = Mu::new(m * th.cos(), m * th.sin());
            let (red, reversed) = reduce_coefficient(mu).unwrap();
            assert!(reversed);
            let a = mu_to_a(mu).unwrap();
            let ar = mu_to_a(red).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert!(
                        (ar[i][j] + a[i][j]).abs() <= 1e-9 * (1.0 + ar[i][j].abs()),
                        "-A(mu) != A(1/conj mu) at {mu:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn equator_coefficients_are_rejected() {
        let err = Mu::new(1.0 + 1e-9, 0.0).check_admissible().unwrap_err();
        assert!(matches!(err, CoeffError::Equator { .. }));
        assert!(Mu::new(1.0 + 1e-3, 0.0).check_admissible().is_ok());
        assert!(Mu::Infinite.check_admissible().is_ok());
        assert!(mu_to_a(Mu::new(0.0, 1.0)).is_err());
    }

    #[test]
    fn coefficient_of_a_known_map() {
        // f(z) = z + 0.3 conj(z) maps (x, y) to (1.3 x, 0.7 y).
        let dom = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let img = [[0.0, 0.0], [1.3, 0.0], [0.0, 0.7]];
        let mu = mu_of_map(dom, img).unwrap();
        match mu {
            Mu::Finite(z) => {
                assert!((z.re - 0.3).abs() <= 1e-15);
                assert!(z.im.abs() <= 1e-15);
            }
            Mu::Infinite => panic!("expected finite"),
        }

        let reflected = [[0.0, 0.0], [1.0, 0.0], [0.0, -1.0]];
        assert_eq!(mu_of_map(dom, reflected).unwrap(), Mu::Infinite);

        let constant = [[2.0, 2.0], [2.0, 2.0], [2.0, 2.0]];
        assert!(matches!(
            mu_of_map(dom, constant),
            Err(CoeffError::ConstantImage)
        ));
    }

    #[test]
    fn metric_coefficient_branches() {
        let g = [[4.0, 0.0], [0.0, 0.25]];
        let mu = mu_from_metric(g, 1).unwrap();
        assert_eq!(mu, Mu::new(0.6, 0.0));

        let id = [[1.0, 0.0], [0.0, 1.0]];
        assert_eq!(mu_from_metric(id, -1).unwrap(), Mu::Infinite);

        let bad = [[2.0, 0.0], [0.0, 1.0]];
        assert!(matches!(
            mu_from_metric(bad, 1),
            Err(CoeffError::BadMetric { .. })
        ));
        assert!(matches!(mu_from_metric(id, 0), Err(CoeffError::BadSign(0))));
    }

    #[test]
    fn third_vertex_examples() {
        let p = third_vertex_image(Mu::new(0.5, 0.0), [0.5, 1.0]).unwrap();
        assert!((p[0] - 0.5).abs() <= 1e-15);
        assert!((p[1] - 1.0 / 3.0).abs() <= 1e-15);

        let q = third_vertex_image(Mu::Infinite, [0.3, 0.8]).unwrap();
        assert_eq!(q, [0.3, -0.8]);
    }

    #[test]
    fn third_vertex_images_of_fixed_modulus_lie_on_a_circle() {
        // Quick version of the full acceptance sweep: one modulus, check that
        // all images are equidistant from the circumcenter of three of them.
        let p = [0.5, 1.0];
        let m = 3.0 / 5.0;
        let pts: Vec<Point> = (0..64)
            .map(|k| {
                let th = std::f64::consts::TAU * k as f64 / 64.0;
                third_vertex_image(Mu::new(m * th.cos(), m * th.sin()), p).unwrap()
            })
            .collect();
        let (a, b, c) = (pts[0], pts[21], pts[43]);
        let d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
        let ux = ((a[0] * a[0] + a[1] * a[1]) * (b[1] - c[1])
            + (b[0] * b[0] + b[1] * b[1]) * (c[1] - a[1])
            + (c[0] * c[0] + c[1] * c[1]) * (a[1] - b[1]))
            / d;
        let uy = ((a[0] * a[0] + a[1] * a[1]) * (c[0] - b[0])
            + (b[0] * b[0] + b[1] * b[1]) * (a[0] - c[0])
            + (c[0] * c[0] + c[1] * c[1]) * (b[0] - a[0]))
            / d;
        let r0 = ((a[0] - ux).powi(2) + (a[1] - uy).powi(2)).sqrt();
        for q in &pts {
            let r = ((q[0] - ux).powi(2) + (q[1] - uy).powi(2)).sqrt();
            assert!((r - r0).abs() <= 1e-9);
        }
    }

    #[test]
    fn field_json_roundtrip_with_omitted_faces() {
        let text = r#"{"faces": [{"face": 2, "mu": [0.25, -0.5]}, {"face": 0, "mu": "inf"}]}"#;
        let field = BeltramiField::from_json(text, 4).unwrap();
        assert_eq!(field.mus()[0], Mu::Infinite);
        assert_eq!(field.mus()[1], Mu::ZERO);
        assert_eq!(field.mus()[2], Mu::new(0.25, -0.5));
        assert_eq!(field.mus()[3], Mu::ZERO);

        let back = BeltramiField::from_json(&field.to_json(), 4).unwrap();
        assert_eq!(back, field);

        assert!(matches!(
            BeltramiField::from_json(text, 2),
            Err(CoeffError::FaceOutOfRange { face: 2, .. })
        ));
    }
}
