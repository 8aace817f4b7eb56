use nalgebra::Matrix3;

use crate::error::{Error, Result};

/// Factor `t = r·s` with `r` a proper rotation and `s` symmetric.
///
/// When the orthogonal polar factor is a reflection, the column paired with
/// the smallest singular value is negated, leaving `s` indefinite.
pub fn polar_decompose(t: &Matrix3<f64>) -> Result<(Matrix3<f64>, Matrix3<f64>)> {
    if !t.iter().all(|x| x.is_finite()) {
        return Err(Error::Singular("non-finite deformation gradient".into()));
    }
    let svd = t.svd(true, true);
    let sv = svd.singular_values;
    let (k_min, s_min) = sv
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let s_max = sv.max();
    if !(s_min > 1e-12 * s_max) {
        return Err(Error::Singular(format!(
            "singular values {:?}",
            sv.as_slice()
        )));
    }
    let mut u = svd.u.unwrap();
    let v_t = svd.v_t.unwrap();
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        u.column_mut(k_min).neg_mut();
        r = u * v_t;
    }
    let s = r.transpose() * t;
    Ok((r, (s + s.transpose()) * 0.5))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_4;

    use nalgebra::Vector3;
    use proptest::prelude::*;

    use super::*;

    fn rz(t: f64) -> Matrix3<f64> {
        Matrix3::new(t.cos(), -t.sin(), 0.0, t.sin(), t.cos(), 0.0, 0.0, 0.0, 1.0)
    }

    #[test]
    fn identity_and_diagonal() {
        let (r, s) = polar_decompose(&Matrix3::identity()).unwrap();
        assert!((r - Matrix3::identity()).norm() < 1e-15);
        assert!((s - Matrix3::identity()).norm() < 1e-15);

        let d = Matrix3::from_diagonal(&Vector3::new(2.0, 1.0, 1.0));
        let (r, s) = polar_decompose(&d).unwrap();
        assert!((r - Matrix3::identity()).norm() < 1e-15);
        assert!((s - d).norm() < 1e-15);
    }

    #[test]
    fn recovers_constructed_factors() {
        let d = Matrix3::from_diagonal(&Vector3::new(2.0, 1.0, 1.0));
        let t = rz(FRAC_PI_4) * d;
        let (r, s) = polar_decompose(&t).unwrap();
        assert!((r - rz(FRAC_PI_4)).norm() < 1e-12);
        assert!((s - d).norm() < 1e-12);
    }

    #[test]
    fn reflection_flips_smallest_direction() {
        let t = Matrix3::from_diagonal(&Vector3::new(3.0, 2.0, -0.5));
        let (r, s) = polar_decompose(&t).unwrap();
        assert!((r.determinant() - 1.0).abs() < 1e-12);
        assert!((r * s - t).norm() < 1e-12);
        assert!((s - Matrix3::from_diagonal(&Vector3::new(3.0, 2.0, -0.5))).norm() < 1e-12);
    }

    #[test]
    fn singular_input_fails() {
        let t = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 0.0));
        assert!(polar_decompose(&t).is_err());
    }

    proptest! {
        #[test]
        fn factors_reproduce_input(entries in proptest::collection::vec(-1.0f64..1.0, 9)) {
            let t = Matrix3::from_row_slice(&entries) + Matrix3::identity() * 0.1;
            prop_assume!(t.determinant().abs() > 1e-3);
            let (r, s) = polar_decompose(&t).unwrap();
            prop_assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-10);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-10);
            prop_assert!((s - s.transpose()).norm() < 1e-10);
            prop_assert!((r * s - t).norm() <= 1e-10 * t.norm());
        }
    }
}
