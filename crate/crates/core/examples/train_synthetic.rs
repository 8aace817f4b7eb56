//! Trains a VAE on a synthetic bend/twist tube corpus and reports the
//! held-out reconstruction error.
//!
//! ```text
//! cargo run --example train_synthetic -- [latent_dim] [epochs] [hidden,...]
//! ```

use std::time::Instant;

use meshvae::corpus::{synthesize, IngestOptions, Labels, ShapeCorpus, SynthKind, TubeSpec};
use meshvae::ops::ShapeModel;
use meshvae::vae::{train, TrainConfig};

fn main() -> meshvae::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let latent_dim = args.first().map_or(8, |s| s.parse().expect("latent dim"));
    let epochs = args.get(1).map_or(200, |s| s.parse().expect("epochs"));
    let hidden: Vec<usize> = args
        .get(2)
        .map_or("64".into(), String::clone)
        .split(',')
        .map(|s| s.parse().expect("hidden width"))
        .collect();

    let spec = TubeSpec::default();
    let shapes = synthesize(SynthKind::BendTwist, 80, 1, &spec)?;
    let corpus = ShapeCorpus::from_meshes(
        shapes.iter().map(|s| s.name.clone()).collect(),
        shapes.into_iter().map(|s| s.mesh).collect(),
        Labels::default(),
        IngestOptions {
            train_fraction: 0.9,
            seed: 1,
            ..Default::default()
        },
    )?;
    println!(
        "{} models, K = {}, {} train / {} held out",
        corpus.len(),
        corpus.feature_len(),
        corpus.train.len(),
        corpus.held_out.len()
    );

    let config = TrainConfig {
        latent_dim,
        epochs,
        hidden,
        batch_size: 16,
        seed: 3,
        ..Default::default()
    };
    let start = Instant::now();
    let (checkpoint, history) = train(&corpus, &config, false, |s| {
        if s.epoch % 100 == 0 {
            println!(
                "epoch {:5}  loss {:.4e}  recon {:.4e}  kl {:.4e}",
                s.epoch, s.loss.total, s.loss.reconstruction, s.loss.kl
            );
        }
    })?;
    println!(
        "trained in {:.1}s, final loss {:.4e}",
        start.elapsed().as_secs_f64(),
        history.last().unwrap().loss.total
    );

    let model = ShapeModel::new(checkpoint)?;
    let diag = corpus.base_mesh().bbox_diagonal();
    let held = model.reconstruction_errors(&corpus, &corpus.held_out)?;
    let train_err = model.reconstruction_errors(&corpus, &corpus.train)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!("bbox diagonal       {diag:.4}");
    println!(
        "train error         {:.5} ({:.3}% of diagonal)",
        mean(&train_err),
        100.0 * mean(&train_err) / diag
    );
    println!(
        "held-out error      {:.5} ({:.3}% of diagonal)",
        mean(&held),
        100.0 * mean(&held) / diag
    );
    Ok(())
}
