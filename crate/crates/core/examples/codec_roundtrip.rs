//! Encodes every model of a synthetic corpus against its first model and
//! reconstructs it again.
//!
//! ```text
//! cargo run --example codec_roundtrip
//! ```

use std::time::Instant;

use meshvae::corpus::{per_vertex_error, synthesize, SynthKind, TubeSpec};
use meshvae::rimd::{FrameCodec, ReconstructionMethod};

fn main() -> meshvae::Result<()> {
    let spec = TubeSpec::default();
    let shapes = synthesize(SynthKind::BendTwist, 8, 1, &spec)?;
    let codec = FrameCodec::new(&shapes[0].mesh)?;
    println!("n = {}, K = {}", spec.vertex_count(), codec.feature_len());
    for method in [
        ReconstructionMethod::GradientMatching,
        ReconstructionMethod::EdgeEnergy,
    ] {
        let codec = codec.clone().with_method(method);
        let start = Instant::now();
        let mut worst = 0.0f64;
        for s in &shapes {
            let back = codec.reconstruct(&codec.encode(&s.mesh)?)?;
            worst = worst.max(per_vertex_error(&back, &s.mesh)? / s.mesh.bbox_diagonal());
        }
        println!(
            "{method:?}: worst error {worst:.2e} of the bbox diagonal, {:.1} ms per model",
            1e3 * start.elapsed().as_secs_f64() / shapes.len() as f64
        );
    }
    Ok(())
}
