//! Deterministic families of deformed open tubes, used as stand-in
//! collections for training and testing.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Vec3};
use crate::obj::save_obj;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// Bend angle only, in one fixed plane.
    CylinderBend,
    /// Twist about the tube axis only.
    CylinderTwist,
    /// Bend (angle and plane), twist and a radial bulge.
    BendTwist,
    /// Two radius classes, each with its own bends and twists.
    TwoClass,
}

impl SynthKind {
    pub fn name(self) -> &'static str {
        match self {
            SynthKind::CylinderBend => "cylinder-bend",
            SynthKind::CylinderTwist => "cylinder-twist",
            SynthKind::BendTwist => "bend-twist",
            SynthKind::TwoClass => "two-class",
        }
    }
}

impl std::str::FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cylinder-bend" => Ok(SynthKind::CylinderBend),
            "cylinder-twist" => Ok(SynthKind::CylinderTwist),
            "bend-twist" => Ok(SynthKind::BendTwist),
            "two-class" => Ok(SynthKind::TwoClass),
            other => Err(Error::InvalidArgument(format!(
                "unknown corpus kind `{other}` (expected cylinder-bend, cylinder-twist, bend-twist or two-class)"
            ))),
        }
    }
}

/// Open tube of `rings × segments` vertices along +z, vertex `r·segments + s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TubeSpec {
    pub rings: usize,
    pub segments: usize,
    pub radius: f64,
    pub length: f64,
}

impl Default for TubeSpec {
    fn default() -> Self {
        TubeSpec {
            rings: 20,
            segments: 20,
            radius: 1.0,
            length: 4.0,
        }
    }
}

impl TubeSpec {
    pub fn vertex_count(&self) -> usize {
        self.rings * self.segments
    }

    pub fn mesh(&self) -> Mesh {
        let (r, s) = (self.rings, self.segments);
        let mut vertices = Vec::with_capacity(r * s);
        for ring in 0..r {
            let z = self.length * ring as f64 / (r - 1) as f64;
            for seg in 0..s {
                let phi = 2.0 * PI * seg as f64 / s as f64;
                vertices.push(Vec3::new(
                    self.radius * phi.cos(),
                    self.radius * phi.sin(),
                    z,
                ));
            }
        }
        let mut faces = Vec::with_capacity(2 * (r - 1) * s);
        for ring in 0..r - 1 {
            for seg in 0..s {
                let a = ring * s + seg;
                let b = ring * s + (seg + 1) % s;
                let c = (ring + 1) * s + (seg + 1) % s;
                let d = (ring + 1) * s + seg;
                faces.push([a, b, c]);
                faces.push([a, c, d]);
            }
        }
        Mesh::new(vertices, faces).expect("tube construction is valid")
    }
}

/// Deformation parameters applied to the reference tube.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TubeDeformation {
    /// Total bend angle of the axis, radians.
    pub bend: f64,
    /// Direction of the bend in the xy-plane, radians.
    pub bend_azimuth: f64,
    /// Total twist about the axis from first to last ring, radians.
    pub twist: f64,
    /// Relative radius change at mid-length (sinusoidal profile).
    pub bulge: f64,
    /// Uniform radius factor.
    pub radius_scale: f64,
}

impl TubeDeformation {
    pub fn identity() -> Self {
        TubeDeformation {
            radius_scale: 1.0,
            ..Default::default()
        }
    }

    pub fn apply(&self, spec: &TubeSpec, reference: &Mesh) -> Mesh {
        let length = spec.length;
        let dir = Vec3::new(self.bend_azimuth.cos(), self.bend_azimuth.sin(), 0.0);
        let side = Vec3::z().cross(&dir);
        let vertices = reference
            .vertices()
            .iter()
            .map(|p| {
                let t = p.z / length;
                let radial = self.radius_scale * (1.0 + self.bulge * (PI * t).sin());
                let twist = self.twist * t;
                let (c, s) = (twist.cos(), twist.sin());
                let x = radial * (c * p.x - s * p.y);
                let y = radial * (s * p.x + c * p.y);
                let offset = Vec3::new(x, y, 0.0);
                let u = offset.dot(&dir);
                let w = offset.dot(&side);
                // Map the straight axis onto a circular arc in the (dir, z) plane.
                let arc = p.z;
                let (centre, normal) = if self.bend.abs() < 1e-12 {
                    (Vec3::new(0.0, 0.0, arc), dir)
                } else {
                    let kappa = self.bend / length;
                    let a = kappa * arc;
                    (
                        dir * ((1.0 - a.cos()) / kappa) + Vec3::z() * (a.sin() / kappa),
                        dir * a.cos() - Vec3::z() * a.sin(),
                    )
                };
                centre + normal * u + side * w
            })
            .collect();
        reference
            .with_vertices(vertices)
            .expect("same vertex count")
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticShape {
    pub name: String,
    pub mesh: Mesh,
    pub deformation: TubeDeformation,
    pub label: Option<String>,
}

/// Seeded family of `count` deformed tubes. Model 0 is always the
/// undeformed reference tube (of class A for `TwoClass`).
pub fn synthesize(
    kind: SynthKind,
    count: usize,
    seed: u64,
    spec: &TubeSpec,
) -> Result<Vec<SyntheticShape>> {
    if count < 2 {
        return Err(Error::InvalidArgument(format!(
            "a corpus needs at least 2 models, got {count}"
        )));
    }
    if spec.rings < 2 || spec.segments < 3 {
        return Err(Error::InvalidArgument(
            "tube needs at least 2 rings and 3 segments".into(),
        ));
    }
    let reference = spec.mesh();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shapes = Vec::with_capacity(count);
    for k in 0..count {
        let mut d = TubeDeformation::identity();
        let mut label = None;
        if k > 0 {
            match kind {
                SynthKind::CylinderBend => {
                    d.bend = rng.random_range(0.0..2.0 * PI / 3.0);
                }
                SynthKind::CylinderTwist => {
                    d.twist = rng.random_range(-PI / 2.0..PI / 2.0);
                }
                SynthKind::BendTwist => {
                    d.bend = rng.random_range(0.0..2.0 * PI / 3.0);
                    d.bend_azimuth = rng.random_range(-PI / 2.0..PI / 2.0);
                    d.twist = rng.random_range(-PI / 2.0..PI / 2.0);
                    d.bulge = rng.random_range(-0.25..0.25);
                }
                SynthKind::TwoClass => {
                    d.bend = rng.random_range(0.0..PI / 3.0);
                    d.bend_azimuth = rng.random_range(-PI..PI);
                    d.twist = rng.random_range(-PI / 4.0..PI / 4.0);
                }
            }
        }
        if kind == SynthKind::TwoClass {
            let class_b = k % 2 == 1;
            d.radius_scale = if class_b { 1.6 } else { 1.0 };
            label = Some(if class_b { "class-b" } else { "class-a" }.to_string());
        }
        shapes.push(SyntheticShape {
            name: format!("{}_{k:03}", kind.name()),
            mesh: d.apply(spec, &reference),
            deformation: d,
            label,
        });
    }
    Ok(shapes)
}

/// Writes `<name>.obj` files and, when the family is labelled, `labels.txt`.
pub fn write_corpus(dir: &Path, shapes: &[SyntheticShape]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for s in shapes {
        save_obj(&s.mesh, dir.join(format!("{}.obj", s.name)))?;
    }
    if shapes.iter().all(|s| s.label.is_some()) {
        let mut text = String::new();
        for s in shapes {
            text.push_str(s.label.as_deref().unwrap());
            text.push('\n');
        }
        let path = dir.join("labels.txt");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

pub fn synthesize_corpus(
    dir: &Path,
    kind: SynthKind,
    count: usize,
    seed: u64,
    spec: &TubeSpec,
) -> Result<Vec<SyntheticShape>> {
    let shapes = synthesize(kind, count, seed, spec)?;
    write_corpus(dir, &shapes)?;
    Ok(shapes)
}

/// Bend angle of a tube mesh laid out like [`TubeSpec::mesh`].
///
/// Ring centroids give the deformed axis; a least-squares line is fitted to
/// the first and to the last quarter of the centroids and the angle between
/// the two fitted directions is returned.
pub fn fitted_bend_angle(mesh: &Mesh, spec: &TubeSpec) -> f64 {
    let s = spec.segments;
    let centroids: Vec<Vec3> = (0..spec.rings)
        .map(|r| mesh.vertices()[r * s..(r + 1) * s].iter().sum::<Vec3>() / s as f64)
        .collect();
    let k = (spec.rings / 4).max(2);
    let head = principal_direction(&centroids[..k]);
    let tail = principal_direction(&centroids[spec.rings - k..]);
    head.dot(&tail).clamp(-1.0, 1.0).acos()
}

/// Unit direction of the least-squares line through `points`, oriented from
/// the first point towards the last.
fn principal_direction(points: &[Vec3]) -> Vec3 {
    let mean = points.iter().sum::<Vec3>() / points.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - mean;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let k = eig.eigenvalues.imax();
    let mut dir: Vec3 = eig.eigenvectors.column(k).into_owned();
    if dir.dot(&(points[points.len() - 1] - points[0])) < 0.0 {
        dir = -dir;
    }
    dir
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_tube_shape() {
        let spec = TubeSpec::default();
        let m = spec.mesh();
        assert_eq!(m.vertex_count(), 400);
        assert_eq!(m.faces().len(), 2 * 19 * 20);
    }

    #[test]
    fn zero_bend_is_identity() {
        let spec = TubeSpec::default();
        let m = spec.mesh();
        let same = TubeDeformation::identity().apply(&spec, &m);
        for (a, b) in same.vertices().iter().zip(m.vertices()) {
            assert!((a - b).norm() < 1e-15);
        }
        let shapes = synthesize(SynthKind::CylinderBend, 3, 1, &spec).unwrap();
        assert_eq!(shapes[0].mesh, m);
    }

    #[test]
    fn seeded_and_labelled() {
        let spec = TubeSpec {
            rings: 6,
            segments: 6,
            ..Default::default()
        };
        let a = synthesize(SynthKind::BendTwist, 5, 9, &spec).unwrap();
        let b = synthesize(SynthKind::BendTwist, 5, 9, &spec).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.mesh, y.mesh);
        }
        let two = synthesize(SynthKind::TwoClass, 80, 1, &spec).unwrap();
        let b_count = two
            .iter()
            .filter(|s| s.label.as_deref() == Some("class-b"))
            .count();
        assert_eq!(b_count, 40);
        assert!(synthesize(SynthKind::TwoClass, 1, 1, &spec).is_err());
    }

    #[test]
    fn bend_preserves_axis_length_and_fit_recovers_angle() {
        let spec = TubeSpec::default();
        let m = spec.mesh();
        for bend in [0.0, 0.4, 1.2, 2.0] {
            let d = TubeDeformation {
                bend,
                ..TubeDeformation::identity()
            };
            let bent = d.apply(&spec, &m);
            // Rings stay rigid: segment lengths unchanged on ring 0 and the last ring.
            let v = bent.vertices();
            let e0 = (v[1] - v[0]).norm();
            let e1 = (m.vertices()[1] - m.vertices()[0]).norm();
            assert!((e0 - e1).abs() < 1e-12);
            // The fitted angle underestimates slightly (quarter-length chords)
            // but is close and increasing.
            let fitted = fitted_bend_angle(&bent, &spec);
            assert!(
                (fitted - bend * 0.8).abs() < 0.1 * bend + 1e-9,
                "{bend} -> {fitted}"
            );
        }
    }

    #[test]
    fn kind_names_parse() {
        for kind in [
            SynthKind::CylinderBend,
            SynthKind::CylinderTwist,
            SynthKind::BendTwist,
            SynthKind::TwoClass,
        ] {
            assert_eq!(kind.name().parse::<SynthKind>().unwrap(), kind);
        }
        assert!("cube".parse::<SynthKind>().is_err());
    }
}
