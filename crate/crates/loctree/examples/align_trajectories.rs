//! Recover the rigid transform between an estimate and a reference frame
//! from corresponded trajectory points, then apply it.
//!
//! ```bash
//! cargo run -p loctree --example align_trajectories
//! ```

use nalgebra::Vector3;

use loctree::align::{apply_transform, umeyama_align, SimilarityTransform};
use loctree::model::{Pose, Trajectory};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // A planar reference path sampled at 10 Hz.
    let reference: Vec<Pose> = (0..120)
        .map(|i| {
            let t = i as f64 * 0.1;
            Pose::new(t, 0.3 * t, (0.4 * t).sin(), 0.0).unwrap()
        })
        .collect();
    let reference = Trajectory::new("reference", reference)?;

    // The estimate lives in a frame rotated by 25 degrees and shifted.
    let frame_offset = SimilarityTransform::planar(25f64.to_radians(), 1.2, -0.7);
    let estimate = apply_transform(&frame_offset, &reference);

    // Fit the alignment on corresponded points (rigid: no scale).
    let src: Vec<Vector3<f64>> = estimate
        .poses()
        .iter()
        .map(|p| Vector3::new(p.x, p.y, p.z))
        .collect();
    let dst: Vec<Vector3<f64>> = reference
        .poses()
        .iter()
        .map(|p| Vector3::new(p.x, p.y, p.z))
        .collect();
    let recovered = umeyama_align(&src, &dst, false)?;

    let yaw = recovered.rotation[(1, 0)]
        .atan2(recovered.rotation[(0, 0)])
        .to_degrees();
    println!("recovered yaw:         {yaw:.6} deg (planted -25)");
    println!(
        "recovered translation: ({:.6}, {:.6}) m",
        recovered.translation.x, recovered.translation.y
    );

    // Aligning the estimate brings it back onto the reference.
    let aligned = apply_transform(&recovered, &estimate);
    let max_residual = aligned
        .poses()
        .iter()
        .zip(reference.poses())
        .map(|(a, b)| ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt())
        .fold(0.0f64, f64::max);
    println!("max residual after alignment: {max_residual:.2e} m");
    Ok(())
}
