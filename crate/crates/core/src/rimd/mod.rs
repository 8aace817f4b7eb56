//! Rotation-invariant mesh difference features.
//!
//! A feature stores, for a deformed mesh relative to a reference with the
//! same connectivity, the symmetric scale/shear part of every vertex's
//! deformation gradient and the log of the relative rotation across every
//! directed edge.
//!
//! ```text
//! [ S_0 (6) | S_1 (6) | ... | S_{n-1} (6) | log dR_e0 (3) | log dR_e1 (3) | ... ]
//! ```
//!
//! Directed edges follow [`Topology`](crate::mesh::Topology) order: source
//! vertex ascending, then target ascending. Each 6-block is the upper
//! triangle of `S` read row-major: `S11 S12 S13 S22 S23 S33`.

mod codec;
mod file;
mod polar;
mod so3;

pub use codec::{
    deformation_gradients, encode, integrate_rotations, reconstruct, reconstruct_with,
    DeformGradients, FrameCodec, ReconstructionMethod, RotationIntegration,
};
pub use file::{read_feature_file, write_feature_file};
pub use polar::polar_decompose;
pub use so3::{project_so3, rotation_angle_between, skew, so3_exp, so3_log};

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub const SCALE_BLOCK: usize = 6;
pub const LOGDR_BLOCK: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct RimdFeature {
    vertex_count: usize,
    edge_count: usize,
    data: Vec<f64>,
}

impl RimdFeature {
    pub fn len_for(vertex_count: usize, directed_edges: usize) -> usize {
        SCALE_BLOCK * vertex_count + LOGDR_BLOCK * directed_edges
    }

    pub fn from_vec(vertex_count: usize, edge_count: usize, data: Vec<f64>) -> Result<Self> {
        let expected = Self::len_for(vertex_count, edge_count);
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: data.len(),
            });
        }
        Ok(RimdFeature {
            vertex_count,
            edge_count,
            data,
        })
    }

    /// Feature of the identity deformation.
    pub fn identity(vertex_count: usize, edge_count: usize) -> Self {
        let mut data = vec![0.0; Self::len_for(vertex_count, edge_count)];
        for block in data[..SCALE_BLOCK * vertex_count].chunks_exact_mut(SCALE_BLOCK) {
            block.copy_from_slice(&[1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        }
        RimdFeature {
            vertex_count,
            edge_count,
            data,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Symmetric scale/shear matrix of vertex `i`.
    pub fn scale(&self, i: usize) -> Matrix3<f64> {
        let s = &self.data[SCALE_BLOCK * i..SCALE_BLOCK * (i + 1)];
        Matrix3::new(s[0], s[1], s[2], s[1], s[3], s[4], s[2], s[4], s[5])
    }

    pub fn set_scale(&mut self, i: usize, s: &Matrix3<f64>) {
        let block = &mut self.data[SCALE_BLOCK * i..SCALE_BLOCK * (i + 1)];
        block.copy_from_slice(&[
            s[(0, 0)],
            s[(0, 1)],
            s[(0, 2)],
            s[(1, 1)],
            s[(1, 2)],
            s[(2, 2)],
        ]);
    }

    /// Log relative rotation of directed edge `e`.
    pub fn logdr(&self, e: usize) -> Vector3<f64> {
        let o = SCALE_BLOCK * self.vertex_count + LOGDR_BLOCK * e;
        Vector3::new(self.data[o], self.data[o + 1], self.data[o + 2])
    }

    pub fn set_logdr(&mut self, e: usize, v: &Vector3<f64>) {
        let o = SCALE_BLOCK * self.vertex_count + LOGDR_BLOCK * e;
        self.data[o..o + 3].copy_from_slice(v.as_slice());
    }
}

/// Euclidean distance between two features of equal length.
pub fn feature_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_lengths() {
        // 2502 vertices, 7500 undirected edges.
        assert_eq!(RimdFeature::len_for(2502, 15000), 60012);
        let f = RimdFeature::identity(4, 12);
        assert_eq!(f.len(), 24 + 36);
        assert_eq!(f.scale(3), Matrix3::identity());
        assert_eq!(f.logdr(11), Vector3::zeros());
        assert!(RimdFeature::from_vec(4, 12, vec![0.0; 10]).is_err());
    }

    #[test]
    fn block_accessors_roundtrip() {
        let mut f = RimdFeature::identity(5, 8);
        let s = Matrix3::new(1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0);
        f.set_scale(2, &s);
        f.set_logdr(7, &Vector3::new(0.1, 0.2, 0.3));
        assert_eq!(f.scale(2), s);
        assert_eq!(&f.as_slice()[12..18], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(f.logdr(7), Vector3::new(0.1, 0.2, 0.3));
        assert_eq!(&f.as_slice()[30 + 21..], &[0.1, 0.2, 0.3]);
    }

    #[test]
    fn distance_rules() {
        let a = [1.0, 0.0, 0.0];
        let b = [0.0, 1.0, 0.0];
        assert_eq!(feature_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(
            feature_distance(&a, &b).unwrap(),
            feature_distance(&b, &a).unwrap()
        );
        assert!((feature_distance(&a, &b).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(feature_distance(&a, &b[..2]).is_err());
    }
}
