use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};

pub const BATCHNORM_EPS: f64 = 1e-5;
pub const BATCHNORM_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Training,
    Inference,
}

/// Per-feature batch normalization with learned gain and shift.
///
/// Running statistics follow `running = momentum·running + (1 - momentum)·batch`,
/// using the unbiased batch variance.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gain: Array1<f64>,
    pub shift: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    pub momentum: f64,
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub struct BatchNormCache {
    normalized: Array2<f64>,
    inv_std: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct BatchNormGrads {
    pub input: Array2<f64>,
    pub gain: Array1<f64>,
    pub shift: Array1<f64>,
}

impl BatchNorm {
    pub fn new(features: usize) -> Self {
        BatchNorm {
            gain: Array1::ones(features),
            shift: Array1::zeros(features),
            running_mean: Array1::zeros(features),
            running_var: Array1::ones(features),
            momentum: BATCHNORM_MOMENTUM,
            eps: BATCHNORM_EPS,
        }
    }

    pub fn features(&self) -> usize {
        self.gain.len()
    }

    fn check_input(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.features() {
            return Err(Error::Shape(format!(
                "batch norm expects {} columns, got {}",
                self.features(),
                x.ncols()
            )));
        }
        Ok(())
    }

    /// Normalizes by batch statistics and updates the running statistics.
    pub fn forward_train(&mut self, x: &Array2<f64>) -> Result<(Array2<f64>, BatchNormCache)> {
        self.check_input(x)?;
        let b = x.nrows();
        if b < 2 {
            return Err(Error::BatchTooSmall(b));
        }
        let mean = x.mean_axis(Axis(0)).unwrap();
        let centered = x - &mean;
        let var = centered.mapv(|v| v * v).mean_axis(Axis(0)).unwrap();
        let inv_std = var.mapv(|v| 1.0 / (v + self.eps).sqrt());
        let normalized = &centered * &inv_std;
        let y = &normalized * &self.gain + &self.shift;

        let unbiased = &var * (b as f64 / (b - 1) as f64);
        self.running_mean = &self.running_mean * self.momentum + &mean * (1.0 - self.momentum);
        self.running_var = &self.running_var * self.momentum + &unbiased * (1.0 - self.momentum);
        Ok((
            y,
            BatchNormCache {
                normalized,
                inv_std,
            },
        ))
    }

    pub fn forward_inference(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        let scale = &self.gain / &self.running_var.mapv(|v| (v + self.eps).sqrt());
        Ok((x - &self.running_mean) * &scale + &self.shift)
    }

    pub fn forward(&mut self, x: &Array2<f64>, mode: Mode) -> Result<Array2<f64>> {
        match mode {
            Mode::Training => self.forward_train(x).map(|(y, _)| y),
            Mode::Inference => self.forward_inference(x),
        }
    }

    /// Full backward pass through the batch statistics.
    pub fn backward(&self, cache: &BatchNormCache, grad_out: &Array2<f64>) -> BatchNormGrads {
        let b = grad_out.nrows() as f64;
        let shift = grad_out.sum_axis(Axis(0));
        let gain = (grad_out * &cache.normalized).sum_axis(Axis(0));
        let g_norm = grad_out * &self.gain;
        let sum_g = g_norm.sum_axis(Axis(0));
        let sum_gx = (&g_norm * &cache.normalized).sum_axis(Axis(0));
        let input = ((&g_norm * b - &sum_g) - &cache.normalized * &sum_gx) * &(&cache.inv_std / b);
        BatchNormGrads { input, gain, shift }
    }
}
