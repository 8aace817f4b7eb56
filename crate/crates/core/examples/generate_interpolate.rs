//! Trains a small model on bent tubes, samples new shapes and walks the
//! latent line between two corpus models.
//!
//! ```text
//! cargo run --example generate_interpolate -- [out_dir]
//! ```

use std::path::PathBuf;

use meshvae::corpus::{
    fitted_bend_angle, synthesize, IngestOptions, Labels, ShapeCorpus, SynthKind, TubeSpec,
};
use meshvae::obj::save_obj;
use meshvae::ops::ShapeModel;
use meshvae::vae::{train, TrainConfig};

fn main() -> meshvae::Result<()> {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "generated".into()),
    );
    std::fs::create_dir_all(&out).map_err(|e| meshvae::Error::Io {
        path: out.clone(),
        source: e,
    })?;
    let spec = TubeSpec::default();
    let shapes = synthesize(SynthKind::CylinderBend, 30, 4, &spec)?;
    let corpus = ShapeCorpus::from_meshes(
        shapes.iter().map(|s| s.name.clone()).collect(),
        shapes.into_iter().map(|s| s.mesh).collect(),
        Labels::default(),
        IngestOptions::default(),
    )?;
    let config = TrainConfig {
        latent_dim: 4,
        hidden: vec![32],
        epochs: 300,
        ..Default::default()
    };
    let (checkpoint, _) = train(&corpus, &config, false, |_| {})?;
    let model = ShapeModel::new(checkpoint)?;

    for (k, mesh) in model.generate(4, 1, None)?.meshes.iter().enumerate() {
        println!(
            "sample {k}: bend {:.1}°",
            fitted_bend_angle(mesh, &spec).to_degrees()
        );
        save_obj(mesh, out.join(format!("sample_{k}.obj")))?;
    }
    let frames = model.interpolate(&corpus.meshes[1], &corpus.meshes[2], 6, None)?;
    for (k, mesh) in frames.meshes.iter().enumerate() {
        println!(
            "frame {k}: bend {:.1}°",
            fitted_bend_angle(mesh, &spec).to_degrees()
        );
        save_obj(mesh, out.join(format!("frame_{k}.obj")))?;
    }
    println!("meshes written to {}", out.display());
    Ok(())
}
