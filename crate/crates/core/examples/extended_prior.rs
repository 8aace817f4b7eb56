//! Compares 2-D embeddings of a two-class corpus under the standard prior
//! and under a prior that narrows the first two latent dimensions.
//!
//! ```text
//! cargo run --example extended_prior -- [alpha] [epochs] [models] [rings]
//! ```

use meshvae::corpus::{synthesize, IngestOptions, Labels, ShapeCorpus, SynthKind, TubeSpec};
use meshvae::ops::{linear_separation_accuracy, retrieval_auc, ShapeModel};
use meshvae::vae::{train, TrainConfig};

fn main() -> meshvae::Result<()> {
    let args: Vec<f64> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("numeric argument"))
        .collect();
    let arg = |k: usize, default: f64| args.get(k).copied().unwrap_or(default);
    let (alpha, epochs, models, rings) = (
        arg(0, 1e6),
        arg(1, 300.0) as usize,
        arg(2, 30.0) as usize,
        arg(3, 12.0) as usize,
    );
    let spec = TubeSpec {
        rings,
        segments: rings,
        ..Default::default()
    };
    let shapes = synthesize(SynthKind::TwoClass, models, 5, &spec)?;
    let labels = Labels::from_tokens(&[shapes.iter().map(|s| s.label.clone().unwrap()).collect()])?;
    let corpus = ShapeCorpus::from_meshes(
        shapes.iter().map(|s| s.name.clone()).collect(),
        shapes.into_iter().map(|s| s.mesh).collect(),
        labels,
        IngestOptions {
            seed: 5,
            ..Default::default()
        },
    )?;
    let classes: Vec<usize> = (0..corpus.len())
        .map(|m| corpus.labels.indices[m][0])
        .collect();
    let d = 8;
    let mut narrow = vec![1.0; d];
    narrow[..2].fill(0.1);
    for (name, prior) in [("extended", narrow), ("standard", vec![1.0; d])] {
        let config = TrainConfig {
            latent_dim: d,
            hidden: vec![64],
            epochs,
            alpha,
            seed: 7,
            sigma_object: Some(prior),
            ..Default::default()
        };
        let (checkpoint, _) = train(&corpus, &config, false, |_| {})?;
        let model = ShapeModel::new(checkpoint)?;
        let points = model.embed(&corpus, 2)?;
        let flags: Vec<bool> = classes.iter().map(|&c| c == 1).collect();
        println!(
            "{name:9} prior: separation {:.0}%, retrieval AUC {:.3}",
            100.0 * linear_separation_accuracy(&points, &flags)?,
            retrieval_auc(&points, &classes)?
        );
    }
    Ok(())
}
