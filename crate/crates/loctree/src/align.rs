//! Geometric preprocessing: least-squares similarity alignment of point sets
//! and ICP-based map-quality scoring for 2-D contour maps.

use nalgebra::{Matrix2, Matrix3, Rotation3, UnitQuaternion, Vector2, Vector3};
use thiserror::Error;

use crate::model::Trajectory;

#[derive(Debug, Error, PartialEq)]
pub enum AlignError {
    #[error("point sets have different lengths ({src} vs {dst})")]
    LengthMismatch { src: usize, dst: usize },
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("inlier radius must be positive, got {0}")]
    InvalidRadius(f64),
}

/// Rotation + translation + uniform scale. Covers rigid 3-D alignment and,
/// with the z axis untouched, planar alignment of embedded 2-D data.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityTransform {
    /// Orthonormal, det +1.
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    /// Positive; 1 for rigid transforms.
    pub scale: f64,
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        SimilarityTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            scale: 1.0,
        }
    }

    /// Planar rotation about z by `yaw` with a 2-D translation.
    pub fn planar(yaw: f64, tx: f64, ty: f64) -> Self {
        let (s, c) = yaw.sin_cos();
        let rotation = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
        SimilarityTransform {
            rotation,
            translation: Vector3::new(tx, ty, 0.0),
            scale: 1.0,
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * p) + self.translation
    }

    pub fn apply_xy(&self, x: f64, y: f64) -> (f64, f64) {
        let v = self.apply(&Vector3::new(x, y, 0.0));
        (v.x, v.y)
    }

    pub fn inverse(&self) -> Self {
        let rot_inv = self.rotation.transpose();
        SimilarityTransform {
            rotation: rot_inv,
            translation: -(rot_inv * self.translation) / self.scale,
            scale: 1.0 / self.scale,
        }
    }

    /// Rotation as row-major nested arrays, for reports.
    pub fn rotation_rows(&self) -> [[f64; 3]; 3] {
        let r = &self.rotation;
        [
            [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
            [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
            [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
        ]
    }

    /// Checks orthonormality, det +1, and positive scale within `tol`.
    pub fn validate(&self, tol: f64) -> Result<(), AlignError> {
        let gram = self.rotation.transpose() * self.rotation;
        if (gram - Matrix3::identity()).norm() > tol {
            return Err(AlignError::DegenerateConfiguration(
                "rotation is not orthonormal".into(),
            ));
        }
        if (self.rotation.determinant() - 1.0).abs() > tol {
            return Err(AlignError::DegenerateConfiguration(
                "rotation determinant is not +1".into(),
            ));
        }
        if self.scale <= 0.0 || self.scale.is_nan() {
            return Err(AlignError::DegenerateConfiguration("scale must be > 0".into()));
        }
        Ok(())
    }
}

/// 2-D point set, e.g. a contour map.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud2D {
    pub points: Vec<(f64, f64)>,
}

impl PointCloud2D {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, AlignError> {
        if points.len() < 3 {
            return Err(AlignError::TooFewPoints {
                needed: 3,
                got: points.len(),
            });
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(AlignError::DegenerateConfiguration(
                "cloud contains non-finite points".into(),
            ));
        }
        Ok(PointCloud2D { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn centroid(&self) -> (f64, f64) {
        let n = self.points.len() as f64;
        let (sx, sy) = self
            .points
            .iter()
            .fold((0.0, 0.0), |(ax, ay), (x, y)| (ax + x, ay + y));
        (sx / n, sy / n)
    }
}

/// ICP registration outcome: inlier fraction in [0, 1] (1 = perfect match),
/// RMSE over the inliers, and the final planar transform.
#[derive(Debug, Clone, PartialEq)]
pub struct MapQualityScore {
    pub fitness: f64,
    pub inlier_rmse: f64,
    pub transform: SimilarityTransform,
    /// Radius used for the inlier count; reported so scores are comparable.
    pub inlier_radius: f64,
}

/// Least-squares similarity transform from `src` onto `dst` minimizing
/// sum of squared distances, with the determinant sign correction preventing
/// reflections. `with_scale = false` fixes the scale at 1 (rigid).
///
/// Planar input (all z equal) is supported: the covariance then has rank 2,
/// which is the minimum this method solves; lower rank (collinear or
/// coincident points) is rejected as degenerate rather than silently solved.
pub fn umeyama_align(
    src: &[Vector3<f64>],
    dst: &[Vector3<f64>],
    with_scale: bool,
) -> Result<SimilarityTransform, AlignError> {
    if src.len() != dst.len() {
        return Err(AlignError::LengthMismatch {
            src: src.len(),
            dst: dst.len(),
        });
    }
    if src.len() < 3 {
        return Err(AlignError::TooFewPoints {
            needed: 3,
            got: src.len(),
        });
    }
    let n = src.len() as f64;
    let mean_src = src.iter().sum::<Vector3<f64>>() / n;
    let mean_dst = dst.iter().sum::<Vector3<f64>>() / n;

    let mut cov = Matrix3::zeros();
    let mut var_src = 0.0;
    for (s, d) in src.iter().zip(dst) {
        let sc = s - mean_src;
        let dc = d - mean_dst;
        cov += dc * sc.transpose();
        var_src += sc.norm_squared();
    }
    cov /= n;
    var_src /= n;

    let svd = nalgebra::SVD::new(cov, true, true);
    let u = svd.u.ok_or_else(|| {
        AlignError::DegenerateConfiguration("SVD of covariance failed".into())
    })?;
    let v_t = svd.v_t.unwrap();
    let sing = svd.singular_values;

    let max_sv = sing.max();
    if max_sv <= 0.0 {
        return Err(AlignError::DegenerateConfiguration(
            "all points coincident".into(),
        ));
    }
    let rank = sing.iter().filter(|&&s| s > max_sv * 1e-12).count();
    if rank < 2 {
        return Err(AlignError::DegenerateConfiguration(format!(
            "covariance rank {rank} < 2 (points collinear or coincident)"
        )));
    }

    let mut sign = Vector3::new(1.0, 1.0, 1.0);
    if (u.determinant() * v_t.determinant()) < 0.0 {
        sign.z = -1.0;
    }
    let rotation = u * Matrix3::from_diagonal(&sign) * v_t;

    let scale = if with_scale {
        let trace_ds = sing.dot(&sign);
        if var_src <= 0.0 {
            return Err(AlignError::DegenerateConfiguration(
                "zero source variance".into(),
            ));
        }
        trace_ds / var_src
    } else {
        1.0
    };

    let translation = mean_dst - scale * (rotation * mean_src);
    Ok(SimilarityTransform {
        rotation,
        translation,
        scale,
    })
}

/// Rigid 2-D Umeyama over corresponded planar points, embedded into the 3-D
/// transform type. The 2-D determinant correction rules out planar
/// reflections, which the ICP loop must never produce.
fn umeyama_rigid_2d(
    src: &[(f64, f64)],
    dst: &[(f64, f64)],
) -> Result<SimilarityTransform, AlignError> {
    if src.len() != dst.len() {
        return Err(AlignError::LengthMismatch {
            src: src.len(),
            dst: dst.len(),
        });
    }
    if src.len() < 2 {
        return Err(AlignError::TooFewPoints {
            needed: 2,
            got: src.len(),
        });
    }
    let n = src.len() as f64;
    let mean = |pts: &[(f64, f64)]| {
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(ax, ay), (x, y)| (ax + x, ay + y));
        Vector2::new(sx / n, sy / n)
    };
    let mean_src = mean(src);
    let mean_dst = mean(dst);

    let mut cov = Matrix2::zeros();
    for (s, d) in src.iter().zip(dst) {
        let sc = Vector2::new(s.0, s.1) - mean_src;
        let dc = Vector2::new(d.0, d.1) - mean_dst;
        cov += dc * sc.transpose();
    }
    cov /= n;

    let svd = nalgebra::SVD::new(cov, true, true);
    let u = svd.u.ok_or_else(|| {
        AlignError::DegenerateConfiguration("SVD of planar covariance failed".into())
    })?;
    let v_t = svd.v_t.unwrap();
    if svd.singular_values.max() <= 0.0 {
        return Err(AlignError::DegenerateConfiguration(
            "all corresponded points coincident".into(),
        ));
    }
    let mut sign = Vector2::new(1.0, 1.0);
    if (u.determinant() * v_t.determinant()) < 0.0 {
        sign.y = -1.0;
    }
    let rot2 = u * Matrix2::from_diagonal(&sign) * v_t;
    let t2 = mean_dst - rot2 * mean_src;

    let rotation = Matrix3::new(
        rot2[(0, 0)],
        rot2[(0, 1)],
        0.0,
        rot2[(1, 0)],
        rot2[(1, 1)],
        0.0,
        0.0,
        0.0,
        1.0,
    );
    Ok(SimilarityTransform {
        rotation,
        translation: Vector3::new(t2.x, t2.y, 0.0),
        scale: 1.0,
    })
}

/// Maps positions through the transform; timestamps are unchanged and
/// orientations are left-composed with the rotation.
pub fn apply_transform(tf: &SimilarityTransform, traj: &Trajectory) -> Trajectory {
    let rot_q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(
        tf.rotation,
    ));
    traj.clone().map_poses(|p| {
        let moved = tf.apply(&Vector3::new(p.x, p.y, p.z));
        let mut out = p.clone();
        out.x = moved.x;
        out.y = moved.y;
        out.z = moved.z;
        out.orientation = p.orientation.map(|q| rot_q * q);
        out
    })
}

/// Uniform-grid accelerator for exact nearest-neighbor queries on a fixed
/// 2-D point set. Ties resolve to the lowest point index, matching a naive
/// linear scan.
struct NearestNeighbor2D {
    cell: f64,
    min_x: f64,
    min_y: f64,
    cols: usize,
    rows: usize,
    bins: Vec<Vec<u32>>,
    points: Vec<(f64, f64)>,
}

impl NearestNeighbor2D {
    fn new(points: &[(f64, f64)]) -> Self {
        let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
        let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &(x, y) in points {
            min_x = min_x.min(x);
            min_y = min_y.min(y);
            max_x = max_x.max(x);
            max_y = max_y.max(y);
        }
        let extent = (max_x - min_x).max(max_y - min_y).max(1e-9);
        // Aim for a handful of points per cell.
        let target_cells = (points.len() as f64).sqrt().ceil().max(1.0);
        let cell = extent / target_cells;
        let cols = ((max_x - min_x) / cell).floor() as usize + 1;
        let rows = ((max_y - min_y) / cell).floor() as usize + 1;
        let mut bins = vec![Vec::new(); cols * rows];
        for (i, &(x, y)) in points.iter().enumerate() {
            let cx = ((x - min_x) / cell).floor() as usize;
            let cy = ((y - min_y) / cell).floor() as usize;
            bins[cy.min(rows - 1) * cols + cx.min(cols - 1)].push(i as u32);
        }
        NearestNeighbor2D {
            cell,
            min_x,
            min_y,
            cols,
            rows,
            bins,
            points: points.to_vec(),
        }
    }

    /// Index and squared distance of the nearest stored point.
    fn nearest(&self, x: f64, y: f64) -> (usize, f64) {
        let cx = (((x - self.min_x) / self.cell).floor() as i64).clamp(0, self.cols as i64 - 1);
        let cy = (((y - self.min_y) / self.cell).floor() as i64).clamp(0, self.rows as i64 - 1);
        let mut best = (usize::MAX, f64::INFINITY);
        let max_ring = self.cols.max(self.rows) as i64;
        for ring in 0..=max_ring {
            // Any point in a farther ring is at least this far away.
            if best.0 != usize::MAX {
                let ring_floor = (ring - 1).max(0) as f64 * self.cell;
                if ring_floor * ring_floor > best.1 {
                    break;
                }
            }
            for dy in -ring..=ring {
                for dx in -ring..=ring {
                    if dx.abs() != ring && dy.abs() != ring {
                        continue; // interior already visited
                    }
                    let (gx, gy) = (cx + dx, cy + dy);
                    if gx < 0 || gy < 0 || gx >= self.cols as i64 || gy >= self.rows as i64 {
                        continue;
                    }
                    for &i in &self.bins[gy as usize * self.cols + gx as usize] {
                        let (px, py) = self.points[i as usize];
                        let d2 = (px - x) * (px - x) + (py - y) * (py - y);
                        if d2 < best.1 || (d2 == best.1 && (i as usize) < best.0) {
                            best = (i as usize, d2);
                        }
                    }
                }
            }
        }
        best
    }
}

/// Coarse planar alignment: centroids matched, yaw chosen from an exhaustive
/// sweep (`yaw_step_deg` steps, default 1) minimizing the mean
/// nearest-neighbor distance. Always returns a best-effort transform for
/// valid clouds; quality is judged downstream.
pub fn global_register(
    src: &PointCloud2D,
    dst: &PointCloud2D,
) -> Result<SimilarityTransform, AlignError> {
    global_register_with_step(src, dst, 1.0)
}

pub fn global_register_with_step(
    src: &PointCloud2D,
    dst: &PointCloud2D,
    yaw_step_deg: f64,
) -> Result<SimilarityTransform, AlignError> {
    if src.len() < 3 || dst.len() < 3 {
        return Err(AlignError::TooFewPoints {
            needed: 3,
            got: src.len().min(dst.len()),
        });
    }
    if yaw_step_deg <= 0.0 || yaw_step_deg.is_nan() {
        return Err(AlignError::DegenerateConfiguration(
            "yaw step must be positive".into(),
        ));
    }
    let nn = NearestNeighbor2D::new(&dst.points);
    let (csx, csy) = src.centroid();
    let (cdx, cdy) = dst.centroid();

    let steps = (360.0 / yaw_step_deg).round() as usize;
    let mut best: Option<(f64, SimilarityTransform)> = None;
    for k in 0..steps {
        let yaw = (k as f64 * yaw_step_deg).to_radians();
        let (s, c) = yaw.sin_cos();
        // t = c_dst - R * c_src keeps the yaw-0 case bitwise exact.
        let tx = cdx - (c * csx - s * csy);
        let ty = cdy - (s * csx + c * csy);
        let mut total = 0.0;
        for &(x, y) in &src.points {
            let px = c * x - s * y + tx;
            let py = s * x + c * y + ty;
            total += nn.nearest(px, py).1.sqrt();
        }
        let mean_dist = total / src.len() as f64;
        if best.as_ref().is_none_or(|(d, _)| mean_dist < *d) {
            let (sy_, cy_) = (s, c);
            let rotation = Matrix3::new(cy_, -sy_, 0.0, sy_, cy_, 0.0, 0.0, 0.0, 1.0);
            best = Some((
                mean_dist,
                SimilarityTransform {
                    rotation,
                    translation: Vector3::new(tx, ty, 0.0),
                    scale: 1.0,
                },
            ));
        }
    }
    Ok(best.expect("non-empty sweep").1)
}

/// ICP map-quality score: starting from the global registration, alternates
/// nearest-neighbor correspondence and rigid 2-D Umeyama until the
/// correspondence set is stable or `max_iters` is reached. Fitness is the
/// fraction of `src` points whose nearest `dst` neighbor ends up within
/// `inlier_radius`; the RMSE is over that inlier subset.
pub fn icp_fitness(
    src: &PointCloud2D,
    dst: &PointCloud2D,
    inlier_radius: f64,
    max_iters: usize,
) -> Result<MapQualityScore, AlignError> {
    if inlier_radius <= 0.0 || inlier_radius.is_nan() {
        return Err(AlignError::InvalidRadius(inlier_radius));
    }
    let nn = NearestNeighbor2D::new(&dst.points);
    let mut transform = global_register(src, dst)?;
    let mut prev_matches: Option<Vec<u32>> = None;

    for _ in 0..max_iters {
        let mut matches = Vec::with_capacity(src.len());
        let mut sse = 0.0;
        for &(x, y) in &src.points {
            let (px, py) = transform.apply_xy(x, y);
            let (idx, d2) = nn.nearest(px, py);
            matches.push(idx as u32);
            sse += d2;
        }
        // Exact overlay: nothing to refine, keep the current transform.
        if sse == 0.0 {
            break;
        }
        if prev_matches.as_ref() == Some(&matches) {
            break;
        }
        let matched: Vec<(f64, f64)> = matches
            .iter()
            .map(|&i| dst.points[i as usize])
            .collect();
        transform = umeyama_rigid_2d(&src.points, &matched)?;
        prev_matches = Some(matches);
    }

    let mut inliers = 0usize;
    let mut inlier_sse = 0.0;
    let r2 = inlier_radius * inlier_radius;
    for &(x, y) in &src.points {
        let (px, py) = transform.apply_xy(x, y);
        let (_, d2) = nn.nearest(px, py);
        if d2 <= r2 {
            inliers += 1;
            inlier_sse += d2;
        }
    }
    let fitness = inliers as f64 / src.len() as f64;
    let inlier_rmse = if inliers > 0 {
        (inlier_sse / inliers as f64).sqrt()
    } else {
        0.0
    };
    Ok(MapQualityScore {
        fitness,
        inlier_rmse,
        transform,
        inlier_radius,
    })
}
