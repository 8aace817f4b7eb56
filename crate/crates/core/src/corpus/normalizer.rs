use crate::error::{Error, Result};

pub const DEFAULT_RANGE: f64 = 0.9;
pub const DEFAULT_EPS: f64 = 1e-6;

/// Per-component affine map of training features onto `[-a, a]`.
///
/// Components whose training range is below `2·eps` are stored as
/// `mid ∓ eps`, so an exactly constant value `f` gets bounds `f ∓ eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureNormalizer {
    min: Vec<f64>,
    max: Vec<f64>,
    a: f64,
    eps: f64,
}

impl FeatureNormalizer {
    pub fn fit<'a>(features: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        Self::fit_with(features, DEFAULT_RANGE, DEFAULT_EPS)
    }

    pub fn fit_with<'a>(
        features: impl IntoIterator<Item = &'a [f64]>,
        a: f64,
        eps: f64,
    ) -> Result<Self> {
        if !(a > 0.0 && eps > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "normalizer needs a > 0 and eps > 0, got a = {a}, eps = {eps}"
            )));
        }
        let mut iter = features.into_iter();
        let first = iter.next().ok_or_else(|| {
            Error::InvalidArgument("cannot fit a normalizer to zero features".into())
        })?;
        let mut min = first.to_vec();
        let mut max = first.to_vec();
        for f in iter {
            if f.len() != min.len() {
                return Err(Error::LengthMismatch {
                    expected: min.len(),
                    actual: f.len(),
                });
            }
            for (k, &v) in f.iter().enumerate() {
                min[k] = min[k].min(v);
                max[k] = max[k].max(v);
            }
        }
        for (lo, hi) in min.iter_mut().zip(max.iter_mut()) {
            if *hi - *lo < 2.0 * eps {
                let mid = if hi == lo { *lo } else { 0.5 * (*lo + *hi) };
                *lo = mid - eps;
                *hi = mid + eps;
            }
        }
        Ok(FeatureNormalizer { min, max, a, eps })
    }

    pub fn from_parts(min: Vec<f64>, max: Vec<f64>, a: f64, eps: f64) -> Result<Self> {
        if min.len() != max.len() {
            return Err(Error::LengthMismatch {
                expected: min.len(),
                actual: max.len(),
            });
        }
        if min.iter().zip(&max).any(|(lo, hi)| !(hi > lo)) {
            return Err(Error::InvalidArgument(
                "normalizer bounds must satisfy max > min".into(),
            ));
        }
        Ok(FeatureNormalizer { min, max, a, eps })
    }

    pub fn len(&self) -> usize {
        self.min.len()
    }

    pub fn is_empty(&self) -> bool {
        self.min.is_empty()
    }

    pub fn min(&self) -> &[f64] {
        &self.min
    }

    pub fn max(&self) -> &[f64] {
        &self.max
    }

    pub fn range(&self) -> f64 {
        self.a
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    fn check(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                actual: f.len(),
            });
        }
        Ok(())
    }

    /// `2a·(f - min)/(max - min) - a`; no clamping.
    pub fn normalize(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check(f)?;
        let a = self.a;
        Ok(f.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| 2.0 * a * (v - lo) / (hi - lo) - a)
            .collect())
    }

    pub fn denormalize(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check(f)?;
        let a = self.a;
        Ok(f.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| (v + a) * (hi - lo) / (2.0 * a) + lo)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn fit_rules() {
        let a = [1.0, 5.0];
        let b = [3.0, 5.0];
        let n = FeatureNormalizer::fit([&a[..], &b[..]]).unwrap();
        assert_eq!(n.min()[0], 1.0);
        assert_eq!(n.max()[0], 3.0);
        assert_eq!(n.min()[1], 5.0 - 1e-6);
        assert_eq!(n.max()[1], 5.0 + 1e-6);
        assert!(FeatureNormalizer::fit(std::iter::empty::<&[f64]>()).is_err());
    }

    #[test]
    fn mapping_values() {
        let n = FeatureNormalizer::fit([&[1.0, -2.0][..], &[3.0, 6.0][..]]).unwrap();
        assert_eq!(n.normalize(&[1.0, -2.0]).unwrap(), vec![-0.9, -0.9]);
        let hi = n.normalize(&[3.0, 6.0]).unwrap();
        assert!((hi[0] - 0.9).abs() < 1e-15 && (hi[1] - 0.9).abs() < 1e-15);
        assert_eq!(n.normalize(&[2.0, 2.0]).unwrap(), vec![0.0, 0.0]);
        // out of range is not clamped
        assert!(n.normalize(&[5.0, 6.0]).unwrap()[0] > 0.9);
        assert!(n.normalize(&[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip(values in proptest::collection::vec(-100.0f64..100.0, 12)) {
            let (x, y) = values.split_at(6);
            let n = FeatureNormalizer::fit([x, y]).unwrap();
            for f in [x, y] {
                let g = n.normalize(f).unwrap();
                prop_assert!(g.iter().all(|v| (-0.9 - 1e-12..=0.9 + 1e-12).contains(v)));
                let back = n.denormalize(&g).unwrap();
                for (a, b) in back.iter().zip(f) {
                    prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
                }
            }
        }
    }
}
