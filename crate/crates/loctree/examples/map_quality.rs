//! Score how well a re-recorded contour map matches the original via ICP:
//! fitness 1.0 means every point finds a neighbor within the inlier radius.
//!
//! ```bash
//! cargo run -p loctree --example map_quality
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use loctree::align::{icp_fitness, PointCloud2D, SimilarityTransform};

/// Walls of a small rectangular hall with a few obstacles, as a point cloud.
fn contour_map(rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let mut points = Vec::new();
    for i in 0..160 {
        let s = i as f64 / 160.0 * 28.0; // perimeter of 10 x 4
        let p = match s {
            s if s < 10.0 => (s, 0.0),
            s if s < 14.0 => (10.0, s - 10.0),
            s if s < 24.0 => (24.0 - s, 4.0),
            s => (0.0, 28.0 - s),
        };
        points.push((p.0 + rng.random_range(-0.01..0.01), p.1 + rng.random_range(-0.01..0.01)));
    }
    // Two racks inside.
    for i in 0..30 {
        points.push((2.0 + i as f64 * 0.05, 1.5));
        points.push((6.0 + i as f64 * 0.05, 2.5));
    }
    points
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let original = PointCloud2D::new(contour_map(&mut rng))?;

    // A second recording session: different frame, sparser coverage (every
    // seventh point missed), and fresh sensor noise on each point.
    let session_frame = SimilarityTransform::planar(12f64.to_radians(), 3.0, -1.0);
    let rerecorded: Vec<(f64, f64)> = original
        .points
        .iter()
        .enumerate()
        .filter(|(i, _)| i % 7 != 0)
        .map(|(_, &(x, y))| {
            let (px, py) = session_frame.apply_xy(x, y);
            (px + rng.random_range(-0.02..0.02), py + rng.random_range(-0.02..0.02))
        })
        .collect();
    let rerecorded = PointCloud2D::new(rerecorded)?;

    let perfect = icp_fitness(&original, &original, 0.1, 50)?;
    println!(
        "same map:        fitness {:.3}, inlier RMSE {:.4} m",
        perfect.fitness, perfect.inlier_rmse
    );

    let score = icp_fitness(&original, &rerecorded, 0.1, 50)?;
    println!(
        "rerecorded map:  fitness {:.3}, inlier RMSE {:.4} m",
        score.fitness, score.inlier_rmse
    );
    let yaw = score.transform.rotation[(1, 0)]
        .atan2(score.transform.rotation[(0, 0)])
        .to_degrees();
    println!("registered session frame yaw: {yaw:.2} deg (planted 12)");
    Ok(())
}
