//! Applications of a trained model: random generation, interpolation,
//! embedding, exploration grids and the measurements used to judge them.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::corpus::{per_vertex_error, ShapeCorpus};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::rimd::{feature_distance, FrameCodec};
use crate::vae::{condition_matrix, Checkpoint};

/// A checkpoint paired with a codec for its reference mesh.
#[derive(Debug, Clone)]
pub struct ShapeModel {
    pub checkpoint: Checkpoint,
    pub codec: FrameCodec,
}

/// Latent codes and the meshes decoded from them.
#[derive(Debug, Clone)]
pub struct Decoded {
    pub codes: Vec<Vec<f64>>,
    pub meshes: Vec<Mesh>,
}

/// Lattice of decoded meshes; cell `(i, j)` is at index `i·resolution + j`.
#[derive(Debug, Clone)]
pub struct Grid {
    pub resolution: usize,
    pub decoded: Decoded,
}

impl ShapeModel {
    pub fn new(checkpoint: Checkpoint) -> Result<Self> {
        let codec = checkpoint.codec()?;
        if codec.feature_len() != checkpoint.feature_len() {
            return Err(Error::LengthMismatch {
                expected: checkpoint.feature_len(),
                actual: codec.feature_len(),
            });
        }
        Ok(ShapeModel { checkpoint, codec })
    }

    pub fn latent_dim(&self) -> usize {
        self.checkpoint.latent_dim()
    }

    pub fn reference(&self) -> &Mesh {
        &self.checkpoint.reference
    }

    pub fn condition(&self, labels: Option<&[String]>) -> Result<Array2<f64>> {
        self.checkpoint.condition(labels)
    }

    pub fn decode(&self, code: &[f64], labels: Option<&[String]>) -> Result<Mesh> {
        let cond = self.condition(labels)?;
        self.checkpoint.decode_mesh(&self.codec, code, &cond)
    }

    fn decode_all(&self, codes: Vec<Vec<f64>>, labels: Option<&[String]>) -> Result<Decoded> {
        let cond = self.condition(labels)?;
        let meshes = codes
            .iter()
            .map(|z| self.checkpoint.decode_mesh(&self.codec, z, &cond))
            .collect::<Result<_>>()?;
        Ok(Decoded { codes, meshes })
    }

    /// Posterior mean of a mesh.
    pub fn encode_mean(&self, mesh: &Mesh, labels: Option<&[String]>) -> Result<Vec<f64>> {
        let cond = self.condition(labels)?;
        Ok(self
            .checkpoint
            .encode_mesh(&self.codec, mesh, &cond)?
            .mean
            .row(0)
            .to_vec())
    }

    /// Codes drawn from the model's prior `N(0, diag σ_object²)`.
    pub fn sample_codes(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let so = self.checkpoint.sigma_object();
        (0..count)
            .map(|_| {
                so.iter()
                    .map(|s| {
                        s * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
                    })
                    .collect()
            })
            .collect()
    }

    pub fn generate(&self, count: usize, seed: u64, labels: Option<&[String]>) -> Result<Decoded> {
        self.condition(labels)?;
        self.decode_all(self.sample_codes(count, seed), labels)
    }

    pub fn interpolate_latent(
        &self,
        a: &[f64],
        b: &[f64],
        steps: usize,
        labels: Option<&[String]>,
    ) -> Result<Decoded> {
        let d = self.latent_dim();
        for code in [a, b] {
            if code.len() != d {
                return Err(Error::LengthMismatch {
                    expected: d,
                    actual: code.len(),
                });
            }
        }
        self.decode_all(latent_path(a, b, steps)?, labels)
    }

    /// Interpolates between the posterior means of two meshes.
    pub fn interpolate(
        &self,
        a: &Mesh,
        b: &Mesh,
        steps: usize,
        labels: Option<&[String]>,
    ) -> Result<Decoded> {
        let za = self.encode_mean(a, labels)?;
        let zb = self.encode_mean(b, labels)?;
        self.interpolate_latent(&za, &zb, steps, labels)
    }

    /// Posterior means of every corpus model, truncated to `dims` components.
    pub fn embed(&self, corpus: &ShapeCorpus, dims: usize) -> Result<Vec<Vec<f64>>> {
        let d = self.latent_dim();
        if dims == 0 || dims > d {
            return Err(Error::InvalidArgument(format!(
                "embedding dimension must lie in 1..={d}, got {dims}"
            )));
        }
        let all = self.posterior_means(corpus, &(0..corpus.len()).collect::<Vec<_>>())?;
        Ok(all
            .into_iter()
            .map(|mut z| {
                z.truncate(dims);
                z
            })
            .collect())
    }

    fn check_corpus(&self, corpus: &ShapeCorpus) -> Result<()> {
        if corpus.key != self.checkpoint.key()
            || corpus.feature_len() != self.checkpoint.feature_len()
        {
            return Err(Error::ConnectivityMismatch(
                "corpus and checkpoint use different connectivity".into(),
            ));
        }
        Ok(())
    }

    /// Posterior means of the given corpus models, using the corpus labels
    /// as conditions when the model is conditional.
    pub fn posterior_means(&self, corpus: &ShapeCorpus, models: &[usize]) -> Result<Vec<Vec<f64>>> {
        self.check_corpus(corpus)?;
        let k = corpus.feature_len();
        let mut x = Array2::zeros((models.len(), k));
        for (row, &m) in models.iter().enumerate() {
            let f = self
                .checkpoint
                .normalizer
                .normalize(corpus.features[m].as_slice())?;
            x.row_mut(row).assign(&ndarray::ArrayView1::from(&f));
        }
        let cond = if self.checkpoint.is_conditional() {
            if corpus.labels.vocabularies != self.checkpoint.vocabularies {
                return Err(Error::Condition(
                    "corpus labels differ from the checkpoint vocabulary".into(),
                ));
            }
            condition_matrix(corpus, models)?
        } else {
            Array2::zeros((models.len(), 0))
        };
        let post = self.checkpoint.model.encode(&x, &cond)?;
        Ok(post.mean.rows().into_iter().map(|r| r.to_vec()).collect())
    }

    /// Codes of a `resolution × resolution` lattice over `range²` in dims
    /// `(d1, d2)`; the other components come from `base`.
    pub fn grid_codes(
        &self,
        dims: (usize, usize),
        base: &[f64],
        range: (f64, f64),
        resolution: usize,
    ) -> Result<Vec<Vec<f64>>> {
        let d = self.latent_dim();
        let (d1, d2) = dims;
        if d1 == d2 || d1 >= d || d2 >= d {
            return Err(Error::InvalidArgument(format!(
                "grid dimensions must be distinct and below {d}, got ({d1}, {d2})"
            )));
        }
        if base.len() != d {
            return Err(Error::LengthMismatch {
                expected: d,
                actual: base.len(),
            });
        }
        if resolution < 2 || !(range.0 < range.1) {
            return Err(Error::InvalidArgument(format!(
                "grid needs resolution ≥ 2 and an increasing range, got {resolution} over [{}, {}]",
                range.0, range.1
            )));
        }
        let at = |k: usize| range.0 + (range.1 - range.0) * k as f64 / (resolution - 1) as f64;
        let mut codes = Vec::with_capacity(resolution * resolution);
        for i in 0..resolution {
            for j in 0..resolution {
                let mut z = base.to_vec();
                z[d1] = at(i);
                z[d2] = at(j);
                codes.push(z);
            }
        }
        Ok(codes)
    }

    pub fn explore_grid(
        &self,
        dims: (usize, usize),
        base: &[f64],
        range: (f64, f64),
        resolution: usize,
        labels: Option<&[String]>,
    ) -> Result<Grid> {
        let codes = self.grid_codes(dims, base, range, resolution)?;
        Ok(Grid {
            resolution,
            decoded: self.decode_all(codes, labels)?,
        })
    }

    /// Reconstruction error of each listed model through its posterior mean.
    pub fn reconstruction_errors(
        &self,
        corpus: &ShapeCorpus,
        models: &[usize],
    ) -> Result<Vec<f64>> {
        let means = self.posterior_means(corpus, models)?;
        models
            .iter()
            .zip(means)
            .map(|(&m, z)| {
                let labels: Option<Vec<String>> = self.checkpoint.is_conditional().then(|| {
                    (0..corpus.labels.vocabularies.len())
                        .map(|f| corpus.labels.label(m, f).to_string())
                        .collect()
                });
                let mesh = self.decode(&z, labels.as_deref())?;
                per_vertex_error(&mesh, &corpus.meshes[m])
            })
            .collect()
    }
}

/// `steps` codes `(1 − t)·a + t·b` at uniform `t` from 0 to 1.
pub fn latent_path(a: &[f64], b: &[f64], steps: usize) -> Result<Vec<Vec<f64>>> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if steps < 2 {
        return Err(Error::InvalidArgument(format!(
            "interpolation needs at least 2 steps, got {steps}"
        )));
    }
    Ok((0..steps)
        .map(|k| {
            let t = k as f64 / (steps - 1) as f64;
            a.iter()
                .zip(b)
                .map(|(x, y)| (1.0 - t) * x + t * y)
                .collect()
        })
        .collect())
}

/// Index and distance of the closest feature; ties go to the smaller index.
pub fn nearest_neighbor<'a>(
    features: impl IntoIterator<Item = &'a [f64]>,
    query: &[f64],
) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (k, f) in features.into_iter().enumerate() {
        let dist = feature_distance(f, query)?;
        if best.is_none_or(|(_, b)| dist < b) {
            best = Some((k, dist));
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("nearest neighbor of an empty set".into()))
}

/// Probability that a random same-label pair is closer than a random
/// different-label pair (ties count one half), over all unordered pairs.
pub fn retrieval_auc(points: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if points.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: points.len(),
            actual: labels.len(),
        });
    }
    let mut scored: Vec<(f64, bool)> = Vec::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = feature_distance(&points[i], &points[j])?;
            scored.push((d, labels[i] == labels[j]));
        }
    }
    let positives = scored.iter().filter(|s| s.1).count();
    let negatives = scored.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::InvalidArgument(
            "AUC needs both same- and cross-label pairs".into(),
        ));
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Mann-Whitney: for each positive, count negatives strictly farther, plus half the ties.
    let mut wins = 0.0;
    let mut start = 0;
    let mut negatives_before = 0usize;
    while start < scored.len() {
        let mut end = start;
        while end < scored.len() && scored[end].0 == scored[start].0 {
            end += 1;
        }
        let pos = scored[start..end].iter().filter(|s| s.1).count();
        let neg = end - start - pos;
        let negatives_after = negatives - negatives_before - neg;
        wins += pos as f64 * (negatives_after as f64 + 0.5 * neg as f64);
        negatives_before += neg;
        start = end;
    }
    Ok(wins / (positives as f64 * negatives as f64))
}

/// Accuracy of the best threshold along the Fisher discriminant direction
/// of two-class `points`.
pub fn linear_separation_accuracy(points: &[Vec<f64>], labels: &[bool]) -> Result<f64> {
    if points.len() != labels.len() || points.is_empty() {
        return Err(Error::LengthMismatch {
            expected: points.len(),
            actual: labels.len(),
        });
    }
    let dim = points[0].len();
    let class_mean = |c: bool| -> Result<nalgebra::DVector<f64>> {
        let members: Vec<&Vec<f64>> = points
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == c)
            .map(|(p, _)| p)
            .collect();
        if members.is_empty() {
            return Err(Error::InvalidArgument(
                "both classes must be present".into(),
            ));
        }
        let mut m = nalgebra::DVector::zeros(dim);
        for p in &members {
            m += nalgebra::DVector::from_column_slice(p);
        }
        Ok(m / members.len() as f64)
    };
    let (m0, m1) = (class_mean(false)?, class_mean(true)?);
    let mut scatter = nalgebra::DMatrix::zeros(dim, dim);
    for (p, &l) in points.iter().zip(labels) {
        let v = nalgebra::DVector::from_column_slice(p) - if l { &m1 } else { &m0 };
        scatter += &v * v.transpose();
    }
    let ridge = 1e-9 * scatter.trace().max(1e-300);
    scatter += nalgebra::DMatrix::identity(dim, dim) * ridge;
    let w = scatter
        .lu()
        .solve(&(&m1 - &m0))
        .ok_or_else(|| Error::Singular("class scatter matrix".into()))?;
    let mut proj: Vec<(f64, bool)> = points
        .iter()
        .zip(labels)
        .map(|(p, &l)| (w.dot(&nalgebra::DVector::from_column_slice(p)), l))
        .collect();
    proj.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = proj.len();
    let total_true = labels.iter().filter(|&&l| l).count();
    // Threshold after position k: predict `false` below, `true` above (and the flip).
    let mut best = 0usize;
    let mut false_below = 0usize;
    let mut true_below = 0usize;
    for k in 0..=n {
        if k > 0 {
            if proj[k - 1].1 {
                true_below += 1;
            } else {
                false_below += 1;
            }
            if k < n && proj[k].0 == proj[k - 1].0 {
                continue;
            }
        }
        let correct = false_below + (total_true - true_below);
        best = best.max(correct).max(n - correct);
    }
    Ok(best as f64 / n as f64)
}
