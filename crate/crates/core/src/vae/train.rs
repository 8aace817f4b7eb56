use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::checkpoint::Checkpoint;
use super::model::{one_hot, LossParts, Vae, VaeConfig};
use crate::corpus::ShapeCorpus;
use crate::error::{Error, Result};
use crate::nn::{Adam, AdamConfig};

/// Optimization and architecture settings for one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Weight of the reconstruction term.
    pub alpha: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub latent_dim: usize,
    pub hidden: Vec<usize>,
    pub sigma_max: f64,
    /// Prior deviation per latent dimension; `None` means all ones.
    pub sigma_object: Option<Vec<f64>>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 1e6,
            learning_rate: 1e-3,
            batch_size: 16,
            epochs: 500,
            seed: 0,
            latent_dim: 128,
            hidden: vec![1024, 512],
            sigma_max: 2.0,
            sigma_object: None,
        }
    }
}

impl TrainConfig {
    pub fn vae_config(&self, feature_len: usize, condition_sizes: Vec<usize>) -> VaeConfig {
        VaeConfig {
            feature_len,
            latent_dim: self.latent_dim,
            hidden: self.hidden.clone(),
            condition_sizes,
            sigma_max: self.sigma_max,
            sigma_object: self
                .sigma_object
                .clone()
                .unwrap_or_else(|| vec![1.0; self.latent_dim]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size < 2 {
            return Err(Error::BatchTooSmall(self.batch_size));
        }
        Ok(())
    }
}

/// Mean loss over one epoch, weighted by batch size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: LossParts,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Shuffled mini-batches; a trailing batch of one sample joins the previous one.
fn batches(count: usize, batch: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(rng);
    let mut out: Vec<Vec<usize>> = order.chunks(batch).map(<[usize]>::to_vec).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        let last = out.pop().unwrap();
        out.last_mut().unwrap().extend(last);
    }
    out
}

/// Fresh model initialized from `config.seed`.
pub fn init_model(
    config: &TrainConfig,
    feature_len: usize,
    condition_sizes: Vec<usize>,
) -> Result<Vae> {
    Vae::new(
        config.vae_config(feature_len, condition_sizes),
        &mut rng_for(config.seed, 0),
    )
}

/// Runs `config.epochs` epochs of ADAM on `data` (rows are normalized
/// features) with one-hot `conditions` (zero columns when unconditional).
pub fn fit(
    model: &mut Vae,
    data: &Array2<f64>,
    conditions: &Array2<f64>,
    config: &TrainConfig,
    mut observer: impl FnMut(&EpochStats),
) -> Result<Vec<EpochStats>> {
    config.validate()?;
    let m = data.nrows();
    if m < 2 {
        return Err(Error::BatchTooSmall(m));
    }
    let sizes: Vec<usize> = model.tensors().iter().map(|t| t.len()).collect();
    let mut adam = Adam::new(
        AdamConfig {
            learning_rate: config.learning_rate,
            ..Default::default()
        },
        &sizes,
    );
    let d = model.config.latent_dim;
    let conditional = conditions.ncols() > 0;
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut shuffle = rng_for(config.seed, 2 * epoch as u64 + 1);
        let mut noise = rng_for(config.seed, 2 * epoch as u64 + 2);
        let mut sum = LossParts::default();
        for batch in batches(m, config.batch_size, &mut shuffle) {
            let x = data.select(Axis(0), &batch);
            let c = if conditional {
                conditions.select(Axis(0), &batch)
            } else {
                Array2::zeros((batch.len(), 0))
            };
            let eps = Array2::from_shape_simple_fn((batch.len(), d), || {
                StandardNormal.sample(&mut noise)
            });
            let (loss, grads) = model.loss_and_gradient(&x, &c, &eps, config.alpha)?;
            if !loss.total.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    loss: loss.total,
                });
            }
            let grad_slices = grads.tensors();
            adam.step(&mut model.tensors_mut(), &grad_slices)
                .map_err(|e| match e {
                    Error::NonFiniteGradient(_) => Error::Diverged {
                        epoch,
                        loss: loss.total,
                    },
                    other => other,
                })?;
            let w = batch.len() as f64;
            sum.total += w * loss.total;
            sum.reconstruction += w * loss.reconstruction;
            sum.kl += w * loss.kl;
        }
        let stats = EpochStats {
            epoch,
            loss: LossParts {
                total: sum.total / m as f64,
                reconstruction: sum.reconstruction / m as f64,
                kl: sum.kl / m as f64,
            },
        };
        log::debug!(
            "epoch {epoch}: loss {:.6e} (reconstruction {:.6e}, kl {:.6e})",
            stats.loss.total,
            stats.loss.reconstruction,
            stats.loss.kl
        );
        observer(&stats);
        history.push(stats);
    }
    if let Some(last) = history.last() {
        log::info!(
            "trained {} epochs, final loss {:.6e}",
            config.epochs,
            last.loss.total
        );
    }
    Ok(history)
}

/// Normalized train-split features of a corpus as a matrix.
pub fn train_matrix(corpus: &ShapeCorpus) -> Result<Array2<f64>> {
    let k = corpus.feature_len();
    let mut data = Array2::zeros((corpus.train.len(), k));
    for (row, &i) in corpus.train.iter().enumerate() {
        let f = corpus.normalized(i)?;
        data.row_mut(row).assign(&ndarray::ArrayView1::from(&f));
    }
    Ok(data)
}

/// One-hot condition rows for `models`; zero columns when the corpus has no labels.
pub fn condition_matrix(corpus: &ShapeCorpus, models: &[usize]) -> Result<Array2<f64>> {
    if corpus.labels.is_empty() {
        return Ok(Array2::zeros((models.len(), 0)));
    }
    let sizes: Vec<usize> = corpus.labels.vocabularies.iter().map(Vec::len).collect();
    let idx: Vec<Vec<usize>> = models
        .iter()
        .map(|&m| corpus.labels.indices[m].clone())
        .collect();
    one_hot(&idx, &sizes)
}

/// Trains on the corpus train split. Conditions are used when the corpus
/// carries labels and `conditional` is set.
pub fn train(
    corpus: &ShapeCorpus,
    config: &TrainConfig,
    conditional: bool,
    observer: impl FnMut(&EpochStats),
) -> Result<(Checkpoint, Vec<EpochStats>)> {
    config.validate()?;
    if corpus.train.len() < 2 {
        return Err(Error::BatchTooSmall(corpus.train.len()));
    }
    let data = train_matrix(corpus)?;
    let (conditions, vocabularies) = if conditional && !corpus.labels.is_empty() {
        (
            condition_matrix(corpus, &corpus.train)?,
            corpus.labels.vocabularies.clone(),
        )
    } else if conditional {
        return Err(Error::Condition("corpus has no label files".into()));
    } else {
        (Array2::zeros((data.nrows(), 0)), Vec::new())
    };
    let sizes = vocabularies.iter().map(Vec::len).collect();
    let mut model = init_model(config, corpus.feature_len(), sizes)?;
    let history = fit(&mut model, &data, &conditions, config, observer)?;
    let checkpoint = Checkpoint {
        normalizer: corpus.normalizer.clone(),
        reference: corpus.base_mesh().clone(),
        training: TrainConfig {
            sigma_object: Some(model.config.sigma_object.clone()),
            ..config.clone()
        },
        epochs: config.epochs,
        vocabularies,
        model,
    };
    Ok((checkpoint, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batching_merges_singletons() {
        let mut rng = rng_for(1, 1);
        let b = batches(9, 4, &mut rng);
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 5]);
        let b = batches(8, 4, &mut rng);
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 4]);
        let mut all: Vec<usize> = b.concat();
        all.sort_unstable();
        assert_eq!(all, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn small_batch_rejected() {
        let cfg = TrainConfig {
            batch_size: 1,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::BatchTooSmall(1))));
    }
}
