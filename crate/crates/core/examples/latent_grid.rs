//! Decodes a 5×5 grid over the first two latent dimensions of a freshly
//! trained model and prints the bend angle of each cell.

use meshvae::corpus::{
    fitted_bend_angle, synthesize, IngestOptions, Labels, ShapeCorpus, SynthKind, TubeSpec,
};
use meshvae::ops::ShapeModel;
use meshvae::vae::{train, Checkpoint, TrainConfig};

fn main() -> meshvae::Result<()> {
    let spec = TubeSpec {
        rings: 12,
        segments: 12,
        ..Default::default()
    };
    let shapes = synthesize(SynthKind::BendTwist, 24, 6, &spec)?;
    let corpus = ShapeCorpus::from_meshes(
        shapes.iter().map(|s| s.name.clone()).collect(),
        shapes.into_iter().map(|s| s.mesh).collect(),
        Labels::default(),
        IngestOptions::default(),
    )?;
    let config = TrainConfig {
        latent_dim: 3,
        hidden: vec![32],
        epochs: 200,
        ..Default::default()
    };
    let (checkpoint, _) = train(&corpus, &config, false, |_| {})?;
    // Checkpoints are plain bytes; reloading gives an identical model.
    let bytes = checkpoint.to_bytes();
    let model = ShapeModel::new(Checkpoint::from_bytes(&bytes)?)?;
    println!("checkpoint: {} bytes", bytes.len());

    let grid = model.explore_grid((0, 1), &[0.0; 3], (-2.0, 2.0), 5, None)?;
    for i in 0..grid.resolution {
        let row: Vec<String> = (0..grid.resolution)
            .map(|j| {
                let mesh = &grid.decoded.meshes[i * grid.resolution + j];
                format!("{:6.1}°", fitted_bend_angle(mesh, &spec).to_degrees())
            })
            .collect();
        println!("{}", row.join(" "));
    }
    Ok(())
}
