//! Rotation logarithm and exponential in axis-angle coordinates.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

const ORTHO_TOL: f64 = 1e-8;

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rodrigues' formula. Uses a Taylor expansion of the coefficients below
/// 1e-4 rad.
pub fn so3_exp(v: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = v.norm_squared();
    let theta = theta2.sqrt();
    let (a, b) = if theta < 1e-4 {
        (
            1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0,
            0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0,
        )
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    let k = skew(v);
    Matrix3::identity() + k * a + k * k * b
}

/// Axis-angle vector `θ·u` with `θ ∈ [0, π]`.
///
/// At `θ = π` the sign of the axis is fixed so that its first nonzero
/// component is positive.
pub fn so3_log(r: &Matrix3<f64>) -> Result<Vector3<f64>> {
    let ortho_err = (r.transpose() * r - Matrix3::identity()).norm();
    if !(ortho_err < ORTHO_TOL) || r.determinant() <= 0.0 {
        return Err(Error::NotRotation(format!(
            "|RᵀR - I| = {ortho_err:e}, det = {}",
            r.determinant()
        )));
    }
    // w = sin(θ)·u
    let w = Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    ) * 0.5;
    let c = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let s = w.norm();
    let theta = s.atan2(c);

    if c > 0.0 || s > 1e-3 {
        if s == 0.0 {
            return Ok(Vector3::zeros());
        }
        return Ok(w * (theta / s));
    }

    // Near π the antisymmetric part vanishes; recover the axis from
    // uuᵀ = (sym(R) - cI) / (1 - c).
    let sym = (r + r.transpose()) * 0.5;
    let b = (sym - Matrix3::identity() * c) / (1.0 - c);
    let k = (0..3)
        .max_by(|&i, &j| b[(i, i)].total_cmp(&b[(j, j)]))
        .unwrap();
    let mut axis: Vector3<f64> = b.column(k).into_owned() / b[(k, k)].max(0.0).sqrt();
    axis.normalize_mut();
    let flip = if s > 1e-12 {
        axis.dot(&w) < 0.0
    } else {
        axis.iter()
            .find(|c| c.abs() > 1e-12)
            .is_some_and(|&c| c < 0.0)
    };
    if flip {
        axis = -axis;
    }
    Ok(axis * theta)
}

/// Nearest rotation in the Frobenius sense.
pub fn project_so3(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.unwrap();
    let v_t = svd.v_t.unwrap();
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let k = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap();
        let mut u = u;
        u.column_mut(k).neg_mut();
        r = u * v_t;
    }
    r
}

/// Geodesic angle between two rotations.
pub fn rotation_angle_between(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let rel = a.transpose() * b;
    let w = Vector3::new(
        rel[(2, 1)] - rel[(1, 2)],
        rel[(0, 2)] - rel[(2, 0)],
        rel[(1, 0)] - rel[(0, 1)],
    ) * 0.5;
    w.norm().atan2((rel.trace() - 1.0) * 0.5)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn rz(t: f64) -> Matrix3<f64> {
        Matrix3::new(t.cos(), -t.sin(), 0.0, t.sin(), t.cos(), 0.0, 0.0, 0.0, 1.0)
    }

    fn random_rotation_vector(rng: &mut impl Rng, max_angle: f64) -> Vector3<f64> {
        loop {
            let v = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let n = v.norm();
            if n > 0.1 && n <= 1.0 {
                return v / n * rng.random_range(0.0..max_angle);
            }
        }
    }

    #[test]
    fn exp_basics() {
        assert_eq!(so3_exp(&Vector3::zeros()), Matrix3::identity());
        let r = so3_exp(&Vector3::new(0.0, 0.0, PI / 2.0));
        assert!((r - rz(PI / 2.0)).norm() < 1e-15);
    }

    #[test]
    fn exp_taylor_branch_matches_series() {
        // For |v| = 1e-12 the exact exponential is I + K + K²/2 to well
        // beyond double precision.
        let v = Vector3::new(3.0, -4.0, 12.0) / 13.0 * 1e-12;
        let k = skew(&v);
        let series = Matrix3::identity() + k + k * k * 0.5;
        assert!((so3_exp(&v) - series).norm() < 1e-28);
        // Branch boundary is continuous.
        let below = Vector3::new(0.0, 0.0, 1e-4 * (1.0 - 1e-12));
        let above = Vector3::new(0.0, 0.0, 1e-4 * (1.0 + 1e-12));
        assert!((so3_exp(&below) - so3_exp(&above)).norm() < 1e-15);
    }

    #[test]
    fn log_basics() {
        assert_eq!(so3_log(&Matrix3::identity()).unwrap(), Vector3::zeros());
        let v = so3_log(&rz(0.3)).unwrap();
        assert!((v - Vector3::new(0.0, 0.0, 0.3)).norm() < 1e-15);
    }

    #[test]
    fn log_rejects_non_rotations() {
        assert!(so3_log(&(Matrix3::identity() * 1.01)).is_err());
        assert!(so3_log(&Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0))).is_err());
    }

    #[test]
    fn log_at_pi_is_deterministic() {
        let v = so3_log(&rz(PI)).unwrap();
        assert!((v - Vector3::new(0.0, 0.0, PI)).norm() < 1e-12);
        let r = Matrix3::from_diagonal(&Vector3::new(-1.0, -1.0, 1.0));
        assert_eq!(so3_log(&r).unwrap(), so3_log(&r.transpose()).unwrap());
        let axis = Vector3::new(-1.0, 2.0, 0.5).normalize();
        let v = so3_log(&so3_exp(&(axis * PI))).unwrap();
        assert!((v + axis * PI).norm() < 1e-12, "{v:?}");
    }

    #[test]
    fn random_roundtrips() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let v = random_rotation_vector(&mut rng, PI - 1e-6);
            let r = so3_exp(&v);
            assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-12);
            assert!((r.determinant() - 1.0).abs() < 1e-12);
            let back = so3_log(&r).unwrap();
            assert!((so3_exp(&back) - r).norm() < 1e-12);
            assert!(
                (back - v).norm() < 1e-8 * (1.0 + v.norm()),
                "{v:?} vs {back:?}"
            );
        }
    }

    #[test]
    fn near_pi_roundtrip() {
        let axis = Vector3::new(0.3, -0.2, 0.9).normalize();
        for eps in [1e-6, 1e-5, 1e-4, 1e-3, 2e-3] {
            let v = axis * (PI - eps);
            let back = so3_log(&so3_exp(&v)).unwrap();
            assert!((back - v).norm() < 1e-9, "eps {eps}: {back:?}");
        }
    }

    #[test]
    fn projection_recovers_rotation() {
        let r = so3_exp(&Vector3::new(0.4, -1.0, 0.2));
        let noisy = r + Matrix3::new(1e-3, 0.0, -2e-3, 0.0, 1e-3, 0.0, 5e-4, 0.0, 0.0);
        let p = project_so3(&noisy);
        assert!((p.determinant() - 1.0).abs() < 1e-12);
        assert!(rotation_angle_between(&p, &r) < 3e-3);
        assert!(rotation_angle_between(&r, &r) < 1e-15);
    }
}
