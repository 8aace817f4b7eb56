//! Variational autoencoder over normalized features, its training loop and
//! the checkpoint format.
//!
//! The loss for a batch of `B` normalized features of length `K` is
//!
//! ```text
//! α/(2BK) · Σ_b Σ_i (f̂_bi − f̃_bi)²  +  1/B · Σ_b KL(q(z|f̃_b) ‖ N(0, diag σ_object²))
//! ```

mod checkpoint;
mod model;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use model::{
    kl_divergence, one_hot, reparameterize, Block, LossParts, Posterior, Vae, VaeConfig,
    SIGMA_FLOOR,
};
pub use train::{condition_matrix, fit, init_model, train, train_matrix, EpochStats, TrainConfig};

#[cfg(test)]
mod tests {
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    use super::*;
    use crate::nn::grad_check;

    fn uniform(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
        Array2::from_shape_simple_fn((rows, cols), || rng.random_range(lo..hi))
    }

    #[test]
    fn kl_closed_forms() {
        assert_eq!(kl_divergence(&[0.0; 3], &[1.0; 3], &[1.0; 3]).unwrap(), 0.0);
        assert!(
            (kl_divergence(&[1.0, 0.0], &[1.0, 1.0], &[1.0, 1.0]).unwrap() - 0.5).abs() < 1e-15
        );
        let v = kl_divergence(&[0.0], &[0.5], &[1.0]).unwrap();
        assert!((v - (2f64.ln() + 0.125 - 0.5)).abs() < 1e-15);
        assert!((v - 0.31815).abs() < 1e-5);
        assert!(kl_divergence(&[0.0], &[0.0], &[1.0]).is_err());
        assert!(kl_divergence(&[0.0], &[1.0], &[-1.0]).is_err());
    }

    #[test]
    fn kl_is_non_negative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let m: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            let s: Vec<f64> = (0..4).map(|_| rng.random_range(0.01..3.0)).collect();
            let so: Vec<f64> = (0..4).map(|_| rng.random_range(0.05..2.0)).collect();
            assert!(kl_divergence(&m, &s, &so).unwrap() >= 0.0);
        }
    }

    #[test]
    fn reparameterization() {
        assert_eq!(
            reparameterize(&[1.0, 2.0], &[0.5, 0.5], &[0.0, 0.0]).unwrap(),
            vec![1.0, 2.0]
        );
        assert_eq!(reparameterize(&[1.0], &[0.0], &[7.0]).unwrap(), vec![1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (mu, sigma, n) = (0.7, 1.3, 100_000);
        let mean = (0..n)
            .map(|_| {
                reparameterize(&[mu], &[sigma], &[StandardNormal.sample(&mut rng)]).unwrap()[0]
            })
            .sum::<f64>()
            / n as f64;
        assert!((mean - mu).abs() < 4.0 * sigma / (n as f64).sqrt());
    }

    fn tiny(seed: u64, hidden: Vec<usize>, k: usize, d: usize) -> Vae {
        Vae::new(
            VaeConfig::new(k, d, hidden),
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap()
    }

    #[test]
    fn head_and_output_ranges() {
        let model = tiny(1, vec![8], 12, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = uniform(5, 12, -5.0, 5.0, &mut rng);
        let none = Array2::zeros((5, 0));
        let p = model.encode(&x, &none).unwrap();
        assert!(p.sigma.iter().all(|&s| s > 0.0 && s < 2.0));
        assert_eq!(model.encode(&x, &none).unwrap().mean, p.mean);
        let single = model
            .encode(
                &x.slice(ndarray::s![..1, ..]).to_owned(),
                &Array2::zeros((1, 0)),
            )
            .unwrap();
        assert_eq!(single.mean.row(0), p.mean.row(0));

        let mut z = uniform(4, 3, -1.0, 1.0, &mut rng);
        for mut row in z.rows_mut() {
            let norm = row.dot(&row).sqrt();
            row.mapv_inplace(|v| 100.0 * v / norm);
        }
        let out = model.decode(&z, &Array2::zeros((4, 0))).unwrap();
        assert!(out.iter().all(|v| v.abs() <= 1.0));
        assert!(model
            .decode(&Array2::zeros((1, 4)), &Array2::zeros((1, 0)))
            .is_err());
    }

    /// Scalar-loop evaluation of the loss for a model without hidden layers.
    #[test]
    fn loss_matches_hand_computation() {
        let mut model = tiny(0, vec![], 4, 2);
        model.mean_head.weight = array![[0.1, -0.2], [0.3, 0.0], [0.0, 0.5], [-0.4, 0.1]];
        model.mean_head.bias = array![0.05, -0.05];
        model.sigma_head.weight = array![[0.2, 0.0], [0.0, 0.2], [0.1, 0.1], [-0.1, 0.3]];
        model.sigma_head.bias = array![0.0, 0.1];
        model.output.weight = array![[0.5, -0.3, 0.2, 0.1], [0.0, 0.4, -0.6, 0.3]];
        model.output.bias = array![0.01, 0.02, 0.03, 0.04];
        let x = array![[0.2, -0.4, 0.6, 0.1], [-0.7, 0.3, 0.0, 0.5]];
        let eps = array![[0.3, -1.0], [0.8, 0.2]];
        let alpha = 10.0;

        let (b, k, d) = (2usize, 4usize, 2usize);
        let mut sq = 0.0;
        let mut kl = 0.0;
        for r in 0..b {
            let mut z = [0.0; 2];
            for j in 0..d {
                let mut m = model.mean_head.bias[j];
                let mut pre = model.sigma_head.bias[j];
                for i in 0..k {
                    m += x[[r, i]] * model.mean_head.weight[[i, j]];
                    pre += x[[r, i]] * model.sigma_head.weight[[i, j]];
                }
                let s = 2.0 / (1.0 + (-pre).exp());
                kl += (1.0 / s).ln() + (s * s + m * m) / 2.0 - 0.5;
                z[j] = m + s * eps[[r, j]];
            }
            for i in 0..k {
                let mut o = model.output.bias[i];
                for j in 0..d {
                    o += z[j] * model.output.weight[[j, i]];
                }
                sq += (o.tanh() - x[[r, i]]).powi(2);
            }
        }
        let recon = alpha / (2.0 * (b * k) as f64) * sq;
        let kl = kl / b as f64;

        let (loss, _) = model
            .loss_and_gradient(&x, &Array2::zeros((2, 0)), &eps, alpha)
            .unwrap();
        assert!((loss.reconstruction - recon).abs() < 1e-13);
        assert!((loss.kl - kl).abs() < 1e-13);
        assert!((loss.total - recon - kl).abs() < 1e-13);

        let (doubled, _) = model
            .loss_and_gradient(&x, &Array2::zeros((2, 0)), &eps, 2.0 * alpha)
            .unwrap();
        assert!((doubled.reconstruction - 2.0 * loss.reconstruction).abs() < 1e-12);
        assert_eq!(doubled.kl, loss.kl);
    }

    #[test]
    fn zero_loss_at_perfect_fit_and_prior() {
        // Output weights zero, bias chosen so tanh reproduces the (constant) data;
        // heads give μ = 0 and σ = σ_max·sigmoid(0) = 1.
        let mut model = tiny(0, vec![], 3, 2);
        model.mean_head.weight.fill(0.0);
        model.sigma_head.weight.fill(0.0);
        model.output.weight.fill(0.0);
        model.output.bias = array![0.3f64.atanh(), (-0.2f64).atanh(), 0.0];
        let x = array![[0.3, -0.2, 0.0], [0.3, -0.2, 0.0]];
        let eps = array![[1.0, -1.0], [0.5, 2.0]];
        let (loss, _) = model
            .loss_and_gradient(&x, &Array2::zeros((2, 0)), &eps, 1e6)
            .unwrap();
        assert!(loss.total.abs() < 1e-20, "{loss:?}");
    }

    fn flat(model: &Vae) -> Vec<f64> {
        model.tensors().concat()
    }

    fn set_flat(model: &mut Vae, values: &[f64]) {
        let mut at = 0;
        for t in model.tensors_mut() {
            t.copy_from_slice(&values[at..at + t.len()]);
            at += t.len();
        }
    }

    fn full_gradient_check(alpha: f64, conditional: bool) {
        let (k, d, b) = (60, 4, 4);
        let mut config = VaeConfig::new(k, d, vec![16]);
        if conditional {
            config.condition_sizes = vec![2, 3];
        }
        config.sigma_object = vec![0.1, 0.5, 1.0, 1.0];
        let model = Vae::new(config, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = uniform(b, k, -0.9, 0.9, &mut rng);
        let cond = if conditional {
            one_hot(&[vec![0, 2], vec![1, 0], vec![0, 1], vec![1, 1]], &[2, 3]).unwrap()
        } else {
            Array2::zeros((b, 0))
        };
        let eps = Array2::from_shape_simple_fn((b, d), || StandardNormal.sample(&mut rng));
        let (_, grads) = model
            .clone()
            .loss_and_gradient(&x, &cond, &eps, alpha)
            .unwrap();
        let analytic = flat(&grads);
        let x0 = flat(&model);
        let report = grad_check(&x0, &analytic, 1e-6, |p| {
            let mut m = model.clone();
            set_flat(&mut m, p);
            m.loss_and_gradient(&x, &cond, &eps, alpha).unwrap().0.total
        });
        assert!(
            report.max_relative_error < 1e-4,
            "alpha {alpha}: {report:?}"
        );
    }

    #[test]
    fn full_model_gradient() {
        full_gradient_check(10.0, false);
        full_gradient_check(1e6, false);
        full_gradient_check(10.0, true);
    }

    #[test]
    fn named_tensor_roundtrip() {
        let mut model = tiny(4, vec![6, 5], 10, 3);
        model.encoder[0].norm.running_mean.fill(0.25);
        let named = model.named_tensors();
        let back = Vae::from_named_tensors(model.config.clone(), |name| {
            Ok(named.iter().find(|(n, _)| n == name).unwrap().1.clone())
        })
        .unwrap();
        assert_eq!(back, model);
    }
}
