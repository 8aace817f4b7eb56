use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::error::{Error, Result};

/// Fully connected layer `y = x·W + b` with `W` stored `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub input: Option<Array2<f64>>,
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            weight: Array2::zeros((inputs, outputs)),
            bias: Array1::zeros(outputs),
        }
    }

    /// Weights uniform in ±√(6 / (fan_in + fan_out)), zero biases.
    pub fn init(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        Dense {
            weight: Array2::from_shape_simple_fn((inputs, outputs), || {
                rng.random_range(-limit..limit)
            }),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.ncols()
    }

    fn check_input(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.inputs() {
            return Err(Error::Shape(format!(
                "dense layer expects {} input columns, got {}",
                self.inputs(),
                x.ncols()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        Ok(x.dot(&self.weight) + &self.bias)
    }

    /// Parameter gradients, plus the input gradient when `need_input` is set.
    pub fn backward(
        &self,
        x: &Array2<f64>,
        grad_out: &Array2<f64>,
        need_input: bool,
    ) -> Result<DenseGrads> {
        self.check_input(x)?;
        if grad_out.dim() != (x.nrows(), self.outputs()) {
            return Err(Error::Shape(format!(
                "dense backward: gradient shape {:?}, expected {:?}",
                grad_out.dim(),
                (x.nrows(), self.outputs())
            )));
        }
        Ok(DenseGrads {
            input: need_input.then(|| grad_out.dot(&self.weight.t())),
            weight: x.t().dot(grad_out),
            bias: grad_out.sum_axis(Axis(0)),
        })
    }
}

#[cfg(test)]
mod tests {
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::nn::grad_check;

    #[test]
    fn identity_and_bias() {
        let mut layer = Dense::zeros(3, 3);
        layer.weight = Array2::eye(3);
        let x = array![[1.0, -2.0, 3.0], [0.5, 0.0, -0.5]];
        assert_eq!(layer.forward(&x).unwrap(), x);

        layer.bias = array![1.0, 2.0, 3.0];
        layer.weight = Array2::from_elem((3, 3), 0.7);
        let y = layer.forward(&Array2::zeros((2, 3))).unwrap();
        assert_eq!(y, array![[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]]);
    }

    #[test]
    fn shape_mismatch() {
        let layer = Dense::zeros(3, 2);
        assert!(layer.forward(&Array2::zeros((2, 4))).is_err());
        assert!(layer
            .backward(&Array2::zeros((2, 3)), &Array2::zeros((2, 3)), true)
            .is_err());
    }

    #[test]
    fn init_respects_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let layer = Dense::init(40, 24, &mut rng);
        let limit = (6.0f64 / 64.0).sqrt();
        assert!(layer.weight.iter().all(|w| w.abs() <= limit));
        assert!(layer.bias.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let layer = Dense::init(4, 3, &mut rng);
        let x = Array2::from_shape_simple_fn((5, 4), || rng.random_range(-1.0..1.0));
        let w = Array2::from_shape_simple_fn((5, 3), || rng.random_range(-1.0..1.0));
        let loss = |layer: &Dense, x: &Array2<f64>| (layer.forward(x).unwrap() * &w).sum();
        let g = layer.backward(&x, &w, true).unwrap();

        let report = grad_check(
            x.as_slice().unwrap(),
            g.input.as_ref().unwrap().as_slice().unwrap(),
            1e-6,
            |p| loss(&layer, &Array2::from_shape_vec((5, 4), p.to_vec()).unwrap()),
        );
        assert!(report.max_relative_error < 1e-6, "{report:?}");

        let report = grad_check(
            layer.weight.as_slice().unwrap(),
            g.weight.as_slice().unwrap(),
            1e-6,
            |p| {
                let mut l = layer.clone();
                l.weight = Array2::from_shape_vec((4, 3), p.to_vec()).unwrap();
                loss(&l, &x)
            },
        );
        assert!(report.max_relative_error < 1e-6, "{report:?}");

        let report = grad_check(
            layer.bias.as_slice().unwrap(),
            g.bias.as_slice().unwrap(),
            1e-6,
            |p| {
                let mut l = layer.clone();
                l.bias = Array1::from_vec(p.to_vec());
                loss(&l, &x)
            },
        );
        assert!(report.max_relative_error < 1e-6, "{report:?}");
    }
}
