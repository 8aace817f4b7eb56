use ndarray::{concatenate, s, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::container::Tensor;
use crate::error::{Error, Result};
use crate::nn::{
    leaky_relu, leaky_relu_backward, sigmoid, sigmoid_backward, tanh, tanh_backward, BatchNorm,
    BatchNormCache, Dense, LEAKY_RELU_SLOPE,
};

/// Lower bound applied to the deviation head output.
pub const SIGMA_FLOOR: f64 = 1e-6;

/// Widths and prior of a [`Vae`].
#[derive(Debug, Clone, PartialEq)]
pub struct VaeConfig {
    /// Feature length `K`.
    pub feature_len: usize,
    pub latent_dim: usize,
    /// Encoder hidden widths; the decoder uses them in reverse.
    pub hidden: Vec<usize>,
    /// Vocabulary size of every condition family; empty for unconditional models.
    pub condition_sizes: Vec<usize>,
    pub sigma_max: f64,
    /// Per-dimension prior deviation.
    pub sigma_object: Vec<f64>,
}

impl VaeConfig {
    pub fn new(feature_len: usize, latent_dim: usize, hidden: Vec<usize>) -> Self {
        VaeConfig {
            feature_len,
            latent_dim,
            hidden,
            condition_sizes: Vec::new(),
            sigma_max: 2.0,
            sigma_object: vec![1.0; latent_dim],
        }
    }

    pub fn condition_width(&self) -> usize {
        self.condition_sizes.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_len == 0 || self.latent_dim == 0 {
            return Err(Error::InvalidArgument(
                "feature length and latent dimension must be positive".into(),
            ));
        }
        if self.hidden.contains(&0) {
            return Err(Error::InvalidArgument(
                "hidden widths must be positive".into(),
            ));
        }
        if self.condition_sizes.contains(&0) {
            return Err(Error::InvalidArgument(
                "condition vocabularies must be non-empty".into(),
            ));
        }
        if !(self.sigma_max > 0.0 && self.sigma_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma_max must be positive, got {}",
                self.sigma_max
            )));
        }
        if self.sigma_object.len() != self.latent_dim {
            return Err(Error::InvalidArgument(format!(
                "sigma_object has {} entries for latent dimension {}",
                self.sigma_object.len(),
                self.latent_dim
            )));
        }
        if !self.sigma_object.iter().all(|&s| s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidArgument(
                "sigma_object entries must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Dense → batch norm → leaky ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub dense: Dense,
    pub norm: BatchNorm,
}

struct BlockCache {
    input: Array2<f64>,
    normed: Array2<f64>,
    norm: BatchNormCache,
}

impl Block {
    fn init(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        Block {
            dense: Dense::init(inputs, outputs, rng),
            norm: BatchNorm::new(outputs),
        }
    }

    fn forward_inference(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let normed = self.norm.forward_inference(&self.dense.forward(x)?)?;
        Ok(leaky_relu(&normed, LEAKY_RELU_SLOPE))
    }

    fn forward_train(&mut self, x: &Array2<f64>) -> Result<(Array2<f64>, BlockCache)> {
        let (normed, norm) = self.norm.forward_train(&self.dense.forward(x)?)?;
        let y = leaky_relu(&normed, LEAKY_RELU_SLOPE);
        Ok((
            y,
            BlockCache {
                input: x.clone(),
                normed,
                norm,
            },
        ))
    }

    fn backward(
        &self,
        cache: &BlockCache,
        grad_out: &Array2<f64>,
        grads: &mut Block,
        need_input: bool,
    ) -> Result<Option<Array2<f64>>> {
        let g = leaky_relu_backward(&cache.normed, grad_out, LEAKY_RELU_SLOPE);
        let bn = self.norm.backward(&cache.norm, &g);
        grads.norm.gain = bn.gain;
        grads.norm.shift = bn.shift;
        let dense = self.dense.backward(&cache.input, &bn.input, need_input)?;
        grads.dense.weight = dense.weight;
        grads.dense.bias = dense.bias;
        Ok(dense.input)
    }
}

/// Fully connected variational autoencoder over normalized features.
///
/// The encoder sees `[feature | condition one-hot]` and emits a mean and a
/// deviation `σ_max·sigmoid(·)` per latent dimension; the decoder sees
/// `[z | condition one-hot]` and ends in `tanh`.
#[derive(Debug, Clone, PartialEq)]
pub struct Vae {
    pub config: VaeConfig,
    pub encoder: Vec<Block>,
    pub mean_head: Dense,
    pub sigma_head: Dense,
    pub decoder: Vec<Block>,
    pub output: Dense,
}

/// Loss value split into its two terms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub total: f64,
    pub reconstruction: f64,
    pub kl: f64,
}

#[derive(Debug, Clone)]
pub struct Posterior {
    pub mean: Array2<f64>,
    pub sigma: Array2<f64>,
}

impl Vae {
    pub fn new(config: VaeConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let c = config.condition_width();
        let mut width = config.feature_len + c;
        let mut encoder = Vec::new();
        for &h in &config.hidden {
            encoder.push(Block::init(width, h, rng));
            width = h;
        }
        let mean_head = Dense::init(width, config.latent_dim, rng);
        let sigma_head = Dense::init(width, config.latent_dim, rng);
        let mut width = config.latent_dim + c;
        let mut decoder = Vec::new();
        for &h in config.hidden.iter().rev() {
            decoder.push(Block::init(width, h, rng));
            width = h;
        }
        let output = Dense::init(width, config.feature_len, rng);
        Ok(Vae {
            config,
            encoder,
            mean_head,
            sigma_head,
            decoder,
            output,
        })
    }

    /// Same shapes, all trainable values zero. Used as a gradient container.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    /// Trainable tensors in a fixed order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        fn dense<'a>(d: &'a Dense, out: &mut Vec<&'a [f64]>) {
            out.push(d.weight.as_slice().expect("standard layout"));
            out.push(d.bias.as_slice().expect("standard layout"));
        }
        let mut out = Vec::new();
        for b in &self.encoder {
            dense(&b.dense, &mut out);
            out.push(b.norm.gain.as_slice().unwrap());
            out.push(b.norm.shift.as_slice().unwrap());
        }
        dense(&self.mean_head, &mut out);
        dense(&self.sigma_head, &mut out);
        for b in &self.decoder {
            dense(&b.dense, &mut out);
            out.push(b.norm.gain.as_slice().unwrap());
            out.push(b.norm.shift.as_slice().unwrap());
        }
        dense(&self.output, &mut out);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.slices_mut(false)
    }

    /// Trainable tensors, optionally interleaved with batch-norm running
    /// statistics in [`Vae::named_tensors`] order.
    fn slices_mut(&mut self, with_stats: bool) -> Vec<&mut [f64]> {
        fn dense<'a>(d: &'a mut Dense, out: &mut Vec<&'a mut [f64]>) {
            out.push(d.weight.as_slice_mut().expect("standard layout"));
            out.push(d.bias.as_slice_mut().expect("standard layout"));
        }
        fn block<'a>(b: &'a mut Block, with_stats: bool, out: &mut Vec<&'a mut [f64]>) {
            dense(&mut b.dense, out);
            out.push(b.norm.gain.as_slice_mut().unwrap());
            out.push(b.norm.shift.as_slice_mut().unwrap());
            if with_stats {
                out.push(b.norm.running_mean.as_slice_mut().unwrap());
                out.push(b.norm.running_var.as_slice_mut().unwrap());
            }
        }
        let mut out = Vec::new();
        for b in &mut self.encoder {
            block(b, with_stats, &mut out);
        }
        dense(&mut self.mean_head, &mut out);
        dense(&mut self.sigma_head, &mut out);
        for b in &mut self.decoder {
            block(b, with_stats, &mut out);
        }
        dense(&mut self.output, &mut out);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Every tensor including batch-norm running statistics, by name.
    pub fn named_tensors(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        let dense = |name: &str, d: &Dense, out: &mut Vec<(String, Tensor)>| {
            out.push((
                format!("{name}.weight"),
                Tensor::new(
                    vec![d.inputs(), d.outputs()],
                    d.weight.iter().copied().collect(),
                ),
            ));
            out.push((format!("{name}.bias"), Tensor::vector(d.bias.to_vec())));
        };
        let block = |name: String, b: &Block, out: &mut Vec<(String, Tensor)>| {
            dense(&format!("{name}.dense"), &b.dense, out);
            out.push((
                format!("{name}.bn.gain"),
                Tensor::vector(b.norm.gain.to_vec()),
            ));
            out.push((
                format!("{name}.bn.shift"),
                Tensor::vector(b.norm.shift.to_vec()),
            ));
            out.push((
                format!("{name}.bn.running_mean"),
                Tensor::vector(b.norm.running_mean.to_vec()),
            ));
            out.push((
                format!("{name}.bn.running_var"),
                Tensor::vector(b.norm.running_var.to_vec()),
            ));
        };
        for (k, b) in self.encoder.iter().enumerate() {
            block(format!("encoder.{k}"), b, &mut out);
        }
        dense("encoder.mean", &self.mean_head, &mut out);
        dense("encoder.sigma", &self.sigma_head, &mut out);
        for (k, b) in self.decoder.iter().enumerate() {
            block(format!("decoder.{k}"), b, &mut out);
        }
        dense("decoder.output", &self.output, &mut out);
        out
    }

    /// Fills a model of the right shape from [`Vae::named_tensors`] output.
    pub fn from_named_tensors(
        config: VaeConfig,
        mut lookup: impl FnMut(&str) -> Result<Tensor>,
    ) -> Result<Self> {
        let mut model = Vae::new(config, &mut ChaCha8Rng::seed_from_u64(0))?;
        let expected = model.named_tensors();
        let mut values = Vec::with_capacity(expected.len());
        for (name, t) in &expected {
            let found = lookup(name)?;
            if found.shape != t.shape {
                return Err(Error::Shape(format!(
                    "tensor `{name}` has shape {:?}, expected {:?}",
                    found.shape, t.shape
                )));
            }
            values.push(found.data);
        }
        for (dst, src) in model.slices_mut(true).into_iter().zip(values) {
            dst.copy_from_slice(&src);
        }
        Ok(model)
    }

    fn with_condition(
        &self,
        x: &Array2<f64>,
        cond: &Array2<f64>,
        width: usize,
    ) -> Result<Array2<f64>> {
        let c = self.config.condition_width();
        if x.ncols() != width {
            return Err(Error::Shape(format!(
                "expected {width} columns, got {}",
                x.ncols()
            )));
        }
        if cond.ncols() != c || (c > 0 && cond.nrows() != x.nrows()) {
            return Err(Error::Condition(format!(
                "model expects {c} condition columns for {} rows, got {}×{}",
                x.nrows(),
                cond.nrows(),
                cond.ncols()
            )));
        }
        if c == 0 {
            return Ok(x.clone());
        }
        Ok(concatenate(Axis(1), &[x.view(), cond.view()]).unwrap())
    }

    fn sigma_from_raw(&self, raw: &Array2<f64>) -> Array2<f64> {
        raw.mapv(|s| (self.config.sigma_max * s).max(SIGMA_FLOOR))
    }

    /// Posterior mean and deviation, batch-norm in inference mode.
    pub fn encode(&self, features: &Array2<f64>, cond: &Array2<f64>) -> Result<Posterior> {
        let mut h = self.with_condition(features, cond, self.config.feature_len)?;
        for b in &self.encoder {
            h = b.forward_inference(&h)?;
        }
        let mean = self.mean_head.forward(&h)?;
        let sigma = self.sigma_from_raw(&sigmoid(&self.sigma_head.forward(&h)?));
        Ok(Posterior { mean, sigma })
    }

    /// Normalized features in (-1, 1), batch-norm in inference mode.
    pub fn decode(&self, z: &Array2<f64>, cond: &Array2<f64>) -> Result<Array2<f64>> {
        let mut h = self.with_condition(z, cond, self.config.latent_dim)?;
        for b in &self.decoder {
            h = b.forward_inference(&h)?;
        }
        Ok(tanh(&self.output.forward(&h)?))
    }

    /// Training-mode loss and gradient for one batch with fixed noise `eps`.
    ///
    /// Batch-norm running statistics are updated as a side effect.
    pub fn loss_and_gradient(
        &mut self,
        features: &Array2<f64>,
        cond: &Array2<f64>,
        eps: &Array2<f64>,
        alpha: f64,
    ) -> Result<(LossParts, Vae)> {
        let (b, k, d) = (
            features.nrows(),
            self.config.feature_len,
            self.config.latent_dim,
        );
        if eps.dim() != (b, d) {
            return Err(Error::Shape(format!(
                "noise shape {:?}, expected {:?}",
                eps.dim(),
                (b, d)
            )));
        }
        let mut h = self.with_condition(features, cond, k)?;
        let mut enc_caches = Vec::with_capacity(self.encoder.len());
        for block in &mut self.encoder {
            let (y, cache) = block.forward_train(&h)?;
            enc_caches.push(cache);
            h = y;
        }
        let enc_out = h;
        let mean = self.mean_head.forward(&enc_out)?;
        let sig_raw = sigmoid(&self.sigma_head.forward(&enc_out)?);
        let sigma = self.sigma_from_raw(&sig_raw);
        let z = &mean + &(&sigma * eps);

        let mut h = self.with_condition(&z, cond, d)?;
        let mut dec_caches = Vec::with_capacity(self.decoder.len());
        for block in &mut self.decoder {
            let (y, cache) = block.forward_train(&h)?;
            dec_caches.push(cache);
            h = y;
        }
        let dec_out = h;
        let recon = tanh(&self.output.forward(&dec_out)?);

        let diff = &recon - features;
        let bf = b as f64;
        let reconstruction = alpha / (2.0 * bf * k as f64) * diff.mapv(|v| v * v).sum();
        let mut kl = 0.0;
        for row in 0..b {
            kl += kl_divergence(
                mean.row(row).as_slice().unwrap(),
                sigma.row(row).as_slice().unwrap(),
                &self.config.sigma_object,
            )?;
        }
        kl /= bf;
        let parts = LossParts {
            total: reconstruction + kl,
            reconstruction,
            kl,
        };

        let mut grads = self.zeros_like();
        let g_recon = diff * (alpha / (bf * k as f64));
        let g_pre = tanh_backward(&recon, &g_recon);
        let out = self.output.backward(&dec_out, &g_pre, true)?;
        grads.output.weight = out.weight;
        grads.output.bias = out.bias;
        let mut g = out.input.unwrap();
        for (idx, cache) in dec_caches.iter().enumerate().rev() {
            g = self.decoder[idx]
                .backward(cache, &g, &mut grads.decoder[idx], true)?
                .unwrap();
        }
        let g_z = g.slice(s![.., ..d]).to_owned();

        let so = &self.config.sigma_object;
        let mut g_mean = g_z.clone();
        let mut g_sigma = &g_z * eps;
        for row in 0..b {
            for j in 0..d {
                let var = so[j] * so[j];
                g_mean[[row, j]] += mean[[row, j]] / (bf * var);
                let s = sigma[[row, j]];
                if self.config.sigma_max * sig_raw[[row, j]] > SIGMA_FLOOR {
                    g_sigma[[row, j]] += (-1.0 / s + s / var) / bf;
                } else {
                    g_sigma[[row, j]] = 0.0;
                }
            }
        }
        let g_sig_pre = sigmoid_backward(&sig_raw, &(g_sigma * self.config.sigma_max));
        let mh = self.mean_head.backward(&enc_out, &g_mean, true)?;
        let sh = self.sigma_head.backward(&enc_out, &g_sig_pre, true)?;
        grads.mean_head.weight = mh.weight;
        grads.mean_head.bias = mh.bias;
        grads.sigma_head.weight = sh.weight;
        grads.sigma_head.bias = sh.bias;
        let mut g = mh.input.unwrap() + sh.input.unwrap();
        for (idx, cache) in enc_caches.iter().enumerate().rev() {
            let need = idx > 0;
            if let Some(next) =
                self.encoder[idx].backward(cache, &g, &mut grads.encoder[idx], need)?
            {
                g = next;
            }
        }
        Ok((parts, grads))
    }
}

/// `KL(N(μ, diag σ²) ‖ N(0, diag σ_object²))`.
pub fn kl_divergence(mean: &[f64], sigma: &[f64], sigma_object: &[f64]) -> Result<f64> {
    if mean.len() != sigma.len() || sigma.len() != sigma_object.len() {
        return Err(Error::LengthMismatch {
            expected: sigma_object.len(),
            actual: mean.len().max(sigma.len()),
        });
    }
    let mut kl = 0.0;
    for ((&m, &s), &so) in mean.iter().zip(sigma).zip(sigma_object) {
        if !(s > 0.0) || !(so > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "deviations must be positive, got σ={s}, σ_object={so}"
            )));
        }
        kl += (so / s).ln() + (s * s + m * m) / (2.0 * so * so) - 0.5;
    }
    Ok(kl)
}

/// `z = μ + σ ⊙ ε`
pub fn reparameterize(mean: &[f64], sigma: &[f64], eps: &[f64]) -> Result<Vec<f64>> {
    if mean.len() != sigma.len() || sigma.len() != eps.len() {
        return Err(Error::LengthMismatch {
            expected: mean.len(),
            actual: sigma.len().max(eps.len()),
        });
    }
    Ok(mean
        .iter()
        .zip(sigma)
        .zip(eps)
        .map(|((m, s), e)| m + s * e)
        .collect())
}

/// One-hot rows for per-model label indices, one block per family.
pub fn one_hot(indices: &[Vec<usize>], sizes: &[usize]) -> Result<Array2<f64>> {
    let width: usize = sizes.iter().sum();
    let mut out = Array2::zeros((indices.len(), width));
    for (row, idx) in indices.iter().enumerate() {
        if idx.len() != sizes.len() {
            return Err(Error::Condition(format!(
                "{} condition values given, model has {} families",
                idx.len(),
                sizes.len()
            )));
        }
        let mut offset = 0;
        for (&i, &n) in idx.iter().zip(sizes) {
            if i >= n {
                return Err(Error::Condition(format!(
                    "label index {i} out of range for {n} labels"
                )));
            }
            out[[row, offset + i]] = 1.0;
            offset += n;
        }
    }
    Ok(out)
}
