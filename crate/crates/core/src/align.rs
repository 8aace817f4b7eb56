//! Rigid (rotation + translation, no scaling) Procrustes alignment.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::mesh::Vec3;

/// Rotation `r` and translation `t` minimizing `Σ |r·source_k + t - target_k|²`.
pub fn rigid_align(source: &[Vec3], target: &[Vec3]) -> Result<(Matrix3<f64>, Vec3)> {
    if source.len() != target.len() {
        return Err(Error::LengthMismatch {
            expected: target.len(),
            actual: source.len(),
        });
    }
    if source.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot align empty point sets".into(),
        ));
    }
    let n = source.len() as f64;
    let cs = source.iter().sum::<Vec3>() / n;
    let ct = target.iter().sum::<Vec3>() / n;
    let mut h = Matrix3::zeros();
    for (s, t) in source.iter().zip(target) {
        h += (t - ct) * (s - cs).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.unwrap();
    let v_t = svd.v_t.unwrap();
    let d = (u * v_t).determinant().signum();
    let r = u * Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * v_t;
    Ok((r, ct - r * cs))
}

/// Applies [`rigid_align`] and returns the aligned copy of `source`.
pub fn aligned(source: &[Vec3], target: &[Vec3]) -> Result<Vec<Vec3>> {
    let (r, t) = rigid_align(source, target)?;
    Ok(source.iter().map(|p| r * p + t).collect())
}
