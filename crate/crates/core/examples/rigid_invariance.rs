//! Shows that the feature of a mesh does not change under rigid motions.

use nalgebra::{Rotation3, Vector3};

use meshvae::corpus::{synthesize, SynthKind, TubeSpec};
use meshvae::rimd::FrameCodec;

fn main() -> meshvae::Result<()> {
    let shapes = synthesize(SynthKind::BendTwist, 3, 2, &TubeSpec::default())?;
    let codec = FrameCodec::new(&shapes[0].mesh)?;
    let mesh = &shapes[2].mesh;
    let base = codec.encode(mesh)?;
    for (k, angle) in [0.3, 1.7, 3.0].into_iter().enumerate() {
        let r = Rotation3::new(Vector3::new(1.0, -2.0, 0.5).normalize() * angle).into_inner();
        let moved = mesh.transformed(&r, &Vector3::new(k as f64, 5.0, -3.0));
        let f = codec.encode(&moved)?;
        let change = base
            .as_slice()
            .iter()
            .zip(f.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        println!("rotation {angle:.1} rad: max feature change {change:.2e}");
    }
    Ok(())
}
