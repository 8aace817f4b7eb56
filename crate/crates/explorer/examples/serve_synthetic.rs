//! Trains a small conditional model on the two-class tube corpus and serves
//! it on http://127.0.0.1:8080.
//!
//! ```text
//! cargo run -p meshvae-explorer --example serve_synthetic -- [port]
//! curl localhost:8080/api/info
//! ```

use meshvae::corpus::{synthesize, IngestOptions, Labels, ShapeCorpus, SynthKind, TubeSpec};
use meshvae::vae::{train, TrainConfig};
use meshvae_explorer::{serve_blocking, Explorer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let port: u16 = std::env::args().nth(1).map_or(Ok(8080), |p| p.parse())?;
    let spec = TubeSpec {
        rings: 12,
        segments: 12,
        ..Default::default()
    };
    let shapes = synthesize(SynthKind::TwoClass, 20, 2, &spec)?;
    let labels = Labels::from_tokens(&[shapes.iter().map(|s| s.label.clone().unwrap()).collect()])?;
    let corpus = ShapeCorpus::from_meshes(
        shapes.iter().map(|s| s.name.clone()).collect(),
        shapes.into_iter().map(|s| s.mesh).collect(),
        labels,
        IngestOptions::default(),
    )?;
    let config = TrainConfig {
        latent_dim: 4,
        hidden: vec![32],
        epochs: 200,
        ..Default::default()
    };
    let (checkpoint, _) = train(&corpus, &config, true, |_| {})?;
    println!("serving on http://127.0.0.1:{port}");
    serve_blocking(
        Explorer::new(checkpoint, Some(corpus))?,
        ([127, 0, 0, 1], port).into(),
    )?;
    Ok(())
}
