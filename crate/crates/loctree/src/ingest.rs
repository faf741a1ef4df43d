//! Parsing of trajectory logs and scenario manifests, plus time
//! synchronization of estimate and reference trajectories at the
//! evaluation times.
//!
//! Formats:
//! - Trajectory CSV: header `t,x,y,z` with optional `qw,qx,qy,qz` columns,
//!   decimal point `.`, `t` in seconds and consistent per experiment.
//! - Manifest: JSON declaring factor schemas, scenarios, experiment file
//!   references, and optionally an application class scheme. A manifest is
//!   either a single dataset (top-level `schema` + `scenarios`) or a
//!   campaign (`datasets`: a list of such objects sharing one analysis).

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::model::{
    validate_manifest, ExperimentRecord, FactorSchema, FactorValue, ModelError,
    PerformanceClassScheme, Pose, Scenario, Trajectory,
};

/// Default maximum ingest gap for interpolation, in seconds. At typical
/// robot speeds the position change across this window is small against the
/// finest class resolution, so a larger gap is an error rather than noise.
pub const DEFAULT_MAX_GAP: f64 = 0.1;

/// Default declared repetition count when a manifest omits `repetitions`.
pub const DEFAULT_REPETITIONS: usize = 3;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed row: {reason}")]
    MalformedRow {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{path}:{line}: timestamp not strictly increasing")]
    NonMonotoneTimestamp { path: PathBuf, line: usize },
    #[error("{path}: no data rows")]
    EmptyFile { path: PathBuf },
    #[error("manifest schema error at {json_path}: {reason}")]
    SchemaError { json_path: String, reason: String },
    #[error("manifest invalid: {0:?}")]
    ManifestInvalid(Vec<ModelError>),
    #[error("query time {t} outside trajectory span [{first}, {last}]")]
    OutOfRange { t: f64, first: f64, last: f64 },
    #[error("bracketing gap {gap}s exceeds max_gap {max_gap}s at query time {t}")]
    GapTooLarge { t: f64, gap: f64, max_gap: f64 },
    #[error("trajectory has fewer than 2 poses, cannot interpolate")]
    TooShort,
    #[error("no evaluation times given")]
    EmptyEvaluationSet,
    #[error("at evaluation index {index}: {source}")]
    Evaluation {
        index: usize,
        source: Box<IngestError>,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Estimate and reference positions interpolated at one evaluation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncedSamplePair {
    pub t: f64,
    pub estimate_xy: (f64, f64),
    pub reference_xy: (f64, f64),
}

// ---------------------------------------------------------------------------
// Trajectory CSV
// ---------------------------------------------------------------------------

/// Parses a trajectory CSV. The file name (stem) becomes the source id.
pub fn parse_trajectory_csv(path: &Path) -> Result<Trajectory, IngestError> {
    let file = fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();

    let header = match lines.next() {
        None => {
            return Err(IngestError::EmptyFile {
                path: path.to_path_buf(),
            })
        }
        Some((_, line)) => line.map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?,
    };
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let with_orientation = match columns.as_slice() {
        ["t", "x", "y", "z"] => false,
        ["t", "x", "y", "z", "qw", "qx", "qy", "qz"] => true,
        _ => {
            return Err(IngestError::MalformedRow {
                path: path.to_path_buf(),
                line: 1,
                reason: format!("unexpected header '{header}'"),
            })
        }
    };

    let mut poses: Vec<Pose> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let expected = if with_orientation { 8 } else { 4 };
        if fields.len() != expected {
            return Err(IngestError::MalformedRow {
                path: path.to_path_buf(),
                line: line_no,
                reason: format!("expected {expected} fields, got {}", fields.len()),
            });
        }
        let mut values = [0.0f64; 8];
        for (i, field) in fields.iter().enumerate() {
            values[i] = field.parse().map_err(|_| IngestError::MalformedRow {
                path: path.to_path_buf(),
                line: line_no,
                reason: format!("field {} ('{field}') is not a number", i + 1),
            })?;
        }
        let pose = if with_orientation {
            Pose::with_orientation(
                values[0],
                values[1],
                values[2],
                values[3],
                [values[4], values[5], values[6], values[7]],
            )
        } else {
            Pose::new(values[0], values[1], values[2], values[3])
        }
        .map_err(|e| IngestError::MalformedRow {
            path: path.to_path_buf(),
            line: line_no,
            reason: e.to_string(),
        })?;
        if let Some(prev) = poses.last() {
            if pose.t <= prev.t {
                return Err(IngestError::NonMonotoneTimestamp {
                    path: path.to_path_buf(),
                    line: line_no,
                });
            }
        }
        poses.push(pose);
    }
    if poses.is_empty() {
        return Err(IngestError::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    let source_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trajectory".into());
    Ok(Trajectory::new(source_id, poses)?)
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

/// Reference to one trajectory file with an optional clock correction added
/// to its timestamps on load.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum TrajectoryRef {
    Path(String),
    WithOffset {
        path: String,
        #[serde(default)]
        time_offset: f64,
    },
}

impl TrajectoryRef {
    pub fn path(&self) -> &str {
        match self {
            TrajectoryRef::Path(p) => p,
            TrajectoryRef::WithOffset { path, .. } => path,
        }
    }

    pub fn time_offset(&self) -> f64 {
        match self {
            TrajectoryRef::Path(_) => 0.0,
            TrajectoryRef::WithOffset { time_offset, .. } => *time_offset,
        }
    }
}

/// Evaluation times inline or in a one-column CSV sidecar (header `t`).
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum EvaluationTimes {
    Inline(Vec<f64>),
    Csv(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ExperimentSource {
    pub estimate: TrajectoryRef,
    pub reference: TrajectoryRef,
    pub evaluation_times: EvaluationTimes,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ScenarioEntry {
    pub id: String,
    pub assignment: BTreeMap<String, FactorValue>,
    #[serde(default)]
    pub experiments: Vec<ExperimentSource>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct DatasetEntry {
    pub schema: FactorSchema,
    pub scenarios: Vec<ScenarioEntry>,
}

/// Names the experiment whose synced pairs calibrate the estimate frame.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct CalibrationRef {
    pub scenario: String,
    #[serde(default = "default_repetition")]
    pub repetition: u32,
}

fn default_repetition() -> u32 {
    1
}

#[derive(Debug, Deserialize)]
struct RawManifest {
    #[serde(default)]
    schema: Option<FactorSchema>,
    #[serde(default)]
    scenarios: Option<Vec<ScenarioEntry>>,
    #[serde(default)]
    datasets: Option<Vec<DatasetEntry>>,
    #[serde(default)]
    performance_classes: Option<PerformanceClassScheme>,
    #[serde(default)]
    repetitions: Option<usize>,
    #[serde(default)]
    calibration: Option<CalibrationRef>,
}

/// Fully validated manifest. Paths inside are resolved relative to the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub base_dir: PathBuf,
    pub datasets: Vec<DatasetEntry>,
    pub performance_classes: Option<PerformanceClassScheme>,
    pub repetitions: usize,
    pub calibration: Option<CalibrationRef>,
}

impl Manifest {
    pub fn resolve(&self, relative: &str) -> PathBuf {
        let p = Path::new(relative);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// All scenarios across datasets, with their dataset index.
    pub fn all_scenarios(&self) -> impl Iterator<Item = (usize, &ScenarioEntry)> {
        self.datasets
            .iter()
            .enumerate()
            .flat_map(|(i, d)| d.scenarios.iter().map(move |s| (i, s)))
    }
}

/// Parses and validates a scenario manifest. Every dataset's scenarios are
/// checked against that dataset's schema; scenario ids must be unique across
/// the whole manifest.
pub fn parse_scenario_manifest(path: &Path) -> Result<Manifest, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let deserializer = &mut serde_json::Deserializer::from_str(&text);
    let raw: RawManifest =
        serde_path_to_error::deserialize(deserializer).map_err(|e| IngestError::SchemaError {
            json_path: e.path().to_string(),
            reason: e.inner().to_string(),
        })?;

    let datasets = match (raw.datasets, raw.schema, raw.scenarios) {
        (Some(datasets), None, None) => datasets,
        (None, Some(schema), Some(scenarios)) => vec![DatasetEntry { schema, scenarios }],
        _ => {
            return Err(IngestError::SchemaError {
                json_path: ".".into(),
                reason: "manifest must have either `datasets` or both `schema` and `scenarios`"
                    .into(),
            })
        }
    };

    // Validate each dataset against its own schema and ids globally.
    let mut errors = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for dataset in &datasets {
        let scenarios: Vec<Scenario> = dataset
            .scenarios
            .iter()
            .map(|s| Scenario {
                id: s.id.clone(),
                assignment: s.assignment.clone(),
            })
            .collect();
        if let Err(mut errs) = validate_manifest(&dataset.schema, &scenarios) {
            // Cross-dataset duplicates are caught below; keep within-dataset errors.
            errors.append(&mut errs);
        }
        for s in &dataset.scenarios {
            if !seen.insert(s.id.clone()) {
                errors.push(ModelError::DuplicateScenarioId(s.id.clone()));
            }
        }
    }
    // Per-dataset validation already reports within-dataset duplicates;
    // drop repeats of the same id complaint.
    errors.dedup();
    if !errors.is_empty() {
        return Err(IngestError::ManifestInvalid(errors));
    }

    Ok(Manifest {
        base_dir: path.parent().unwrap_or(Path::new(".")).to_path_buf(),
        datasets,
        performance_classes: raw.performance_classes,
        repetitions: raw.repetitions.unwrap_or(DEFAULT_REPETITIONS),
        calibration: raw.calibration,
    })
}

/// Parses a 2-D point cloud CSV with header `x,y`.
pub fn parse_point_cloud_csv(path: &Path) -> Result<Vec<(f64, f64)>, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.split(',').map(str::trim).collect::<Vec<_>>() == ["x", "y"] => {}
        Some((_, header)) => {
            return Err(IngestError::MalformedRow {
                path: path.to_path_buf(),
                line: 1,
                reason: format!("expected header 'x,y', got '{header}'"),
            })
        }
        None => {
            return Err(IngestError::EmptyFile {
                path: path.to_path_buf(),
            })
        }
    }
    let mut points = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(IngestError::MalformedRow {
                path: path.to_path_buf(),
                line: idx + 1,
                reason: format!("expected 2 fields, got {}", fields.len()),
            });
        }
        let parse = |f: &str| -> Result<f64, IngestError> {
            f.parse().map_err(|_| IngestError::MalformedRow {
                path: path.to_path_buf(),
                line: idx + 1,
                reason: format!("'{f}' is not a number"),
            })
        };
        points.push((parse(fields[0])?, parse(fields[1])?));
    }
    if points.is_empty() {
        return Err(IngestError::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    Ok(points)
}

/// Parses a one-column evaluation-time CSV with header `t`.
pub fn parse_evaluation_times_csv(path: &Path) -> Result<Vec<f64>, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "t" => {}
        Some((_, header)) => {
            return Err(IngestError::MalformedRow {
                path: path.to_path_buf(),
                line: 1,
                reason: format!("expected header 't', got '{header}'"),
            })
        }
        None => {
            return Err(IngestError::EmptyFile {
                path: path.to_path_buf(),
            })
        }
    }
    let mut times = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let t: f64 = line.trim().parse().map_err(|_| IngestError::MalformedRow {
            path: path.to_path_buf(),
            line: idx + 1,
            reason: format!("'{line}' is not a number"),
        })?;
        times.push(t);
    }
    if times.is_empty() {
        return Err(IngestError::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    Ok(times)
}

/// Loads one experiment's trajectories and evaluation times from a manifest.
pub fn load_experiment(
    manifest: &Manifest,
    scenario: &ScenarioEntry,
    repetition_index: u32,
    source: &ExperimentSource,
) -> Result<ExperimentRecord, IngestError> {
    let estimate = parse_trajectory_csv(&manifest.resolve(source.estimate.path()))?
        .shift_time(source.estimate.time_offset());
    let reference = parse_trajectory_csv(&manifest.resolve(source.reference.path()))?
        .shift_time(source.reference.time_offset());
    let evaluation_times = match &source.evaluation_times {
        EvaluationTimes::Inline(times) => times.clone(),
        EvaluationTimes::Csv(path) => parse_evaluation_times_csv(&manifest.resolve(path))?,
    };
    Ok(ExperimentRecord::new(
        scenario.id.clone(),
        repetition_index,
        estimate,
        reference,
        evaluation_times,
    )?)
}

// ---------------------------------------------------------------------------
// Interpolation and synchronization
// ---------------------------------------------------------------------------

/// Pose at time `t`: exact pass-through at sample times, linear position
/// interpolation between brackets, spherical orientation interpolation when
/// both bracketing poses carry one. Fails when the bracketing interval is
/// longer than `max_gap`.
pub fn interpolate_at(traj: &Trajectory, t: f64, max_gap: f64) -> Result<Pose, IngestError> {
    let poses = traj.poses();
    if poses.len() < 2 {
        return Err(IngestError::TooShort);
    }
    let (first, last) = (traj.first_time(), traj.last_time());
    if t < first || t > last {
        return Err(IngestError::OutOfRange { t, first, last });
    }
    // Index of the first pose with time >= t.
    let upper = poses.partition_point(|p| p.t < t);
    if poses[upper].t == t {
        return Ok(poses[upper].clone());
    }
    let (a, b) = (&poses[upper - 1], &poses[upper]);
    let gap = b.t - a.t;
    if gap > max_gap {
        return Err(IngestError::GapTooLarge { t, gap, max_gap });
    }
    let alpha = (t - a.t) / gap;
    let orientation = match (&a.orientation, &b.orientation) {
        (Some(qa), Some(qb)) => Some(
            qa.try_slerp(qb, alpha, 1e-9)
                .unwrap_or(if alpha < 0.5 { *qa } else { *qb }),
        ),
        _ => None,
    };
    Ok(Pose {
        t,
        x: a.x + alpha * (b.x - a.x),
        y: a.y + alpha * (b.y - a.y),
        z: a.z + alpha * (b.z - a.z),
        orientation,
    })
}

/// Interpolates both trajectories of an experiment at every evaluation time.
/// Errors are annotated with the evaluation index they occurred at.
pub fn sync_pairs(
    rec: &ExperimentRecord,
    max_gap: f64,
) -> Result<Vec<SyncedSamplePair>, IngestError> {
    if rec.evaluation_times.is_empty() {
        return Err(IngestError::EmptyEvaluationSet);
    }
    rec.evaluation_times
        .iter()
        .enumerate()
        .map(|(index, &t)| {
            let est = interpolate_at(&rec.estimate, t, max_gap).map_err(|e| {
                IngestError::Evaluation {
                    index,
                    source: Box::new(e),
                }
            })?;
            let refp = interpolate_at(&rec.reference, t, max_gap).map_err(|e| {
                IngestError::Evaluation {
                    index,
                    source: Box::new(e),
                }
            })?;
            Ok(SyncedSamplePair {
                t,
                estimate_xy: est.xy(),
                reference_xy: refp.xy(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(dir: &tempfile::TempDir, name: &str, content: &str) -> PathBuf {
        let path = dir.path().join(name);
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    fn line_traj(n: usize, dt: f64, speed: f64) -> Trajectory {
        let poses = (0..n)
            .map(|i| {
                let t = i as f64 * dt;
                Pose::new(t, speed * t, 0.0, 0.0).unwrap()
            })
            .collect();
        Trajectory::new("line", poses).unwrap()
    }

    #[test]
    fn parse_minimal_trajectory() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "a.csv", "t,x,y,z\n0.0,1.0,2.0,3.0\n1.0,2.0,3.0,4.0\n");
        let traj = parse_trajectory_csv(&path).unwrap();
        assert_eq!(traj.len(), 2);
        assert_eq!(traj.source_id, "a");
        assert!(traj.poses()[0].orientation.is_none());
    }

    #[test]
    fn parse_rejects_decreasing_time() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "a.csv", "t,x,y,z\n1.0,0,0,0\n0.5,0,0,0\n");
        assert!(matches!(
            parse_trajectory_csv(&path),
            Err(IngestError::NonMonotoneTimestamp { line: 3, .. })
        ));
    }

    #[test]
    fn parse_quaternion_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            &dir,
            "q.csv",
            "t,x,y,z,qw,qx,qy,qz\n0.0,0,0,0,1,0,0,0\n1.0,1,0,0,0.7071067811865476,0,0,0.7071067811865476\n",
        );
        let traj = parse_trajectory_csv(&path).unwrap();
        assert!(traj.poses().iter().all(|p| p.orientation.is_some()));
    }

    #[test]
    fn parse_rejects_bad_quaternion_norm() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "q.csv", "t,x,y,z,qw,qx,qy,qz\n0.0,0,0,0,1,1,0,0\n");
        assert!(matches!(
            parse_trajectory_csv(&path),
            Err(IngestError::MalformedRow { line: 2, .. })
        ));
    }

    #[test]
    fn parse_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "e.csv", "t,x,y,z\n");
        assert!(matches!(
            parse_trajectory_csv(&path),
            Err(IngestError::EmptyFile { .. })
        ));
    }

    #[test]
    fn interpolate_linear_midpoint() {
        let poses = vec![
            Pose::new(0.0, 0.0, 0.0, 0.0).unwrap(),
            Pose::new(2.0, 4.0, 0.0, 0.0).unwrap(),
        ];
        let traj = Trajectory::new("t", poses).unwrap();
        let p = interpolate_at(&traj, 1.0, 10.0).unwrap();
        assert_eq!(p.x, 2.0);
    }

    #[test]
    fn interpolate_out_of_range() {
        let traj = line_traj(3, 1.0, 1.0);
        assert!(matches!(
            interpolate_at(&traj, 3.0, 10.0),
            Err(IngestError::OutOfRange { .. })
        ));
        assert!(matches!(
            interpolate_at(&traj, -0.5, 10.0),
            Err(IngestError::OutOfRange { .. })
        ));
    }

    #[test]
    fn interpolate_gap_guard() {
        let traj = line_traj(2, 0.5, 1.0);
        assert!(matches!(
            interpolate_at(&traj, 0.25, 0.1),
            Err(IngestError::GapTooLarge { .. })
        ));
        // Exact sample times bypass the gap check.
        assert_eq!(interpolate_at(&traj, 0.5, 0.1).unwrap().x, 0.5);
    }

    #[test]
    fn interpolate_exact_passthrough() {
        let traj = line_traj(5, 0.1, 0.3);
        for (i, pose) in traj.poses().iter().enumerate() {
            let p = interpolate_at(&traj, pose.t, 1.0).unwrap();
            assert_eq!(&p, &traj.poses()[i]);
        }
    }

    #[test]
    fn interpolate_slerps_orientation() {
        let quarter_turn = std::f64::consts::FRAC_PI_4;
        let poses = vec![
            Pose::with_orientation(0.0, 0.0, 0.0, 0.0, [1.0, 0.0, 0.0, 0.0]).unwrap(),
            // 90 degrees about z
            Pose::with_orientation(
                1.0,
                1.0,
                0.0,
                0.0,
                [quarter_turn.cos(), 0.0, 0.0, quarter_turn.sin()],
            )
            .unwrap(),
        ];
        let traj = Trajectory::new("t", poses).unwrap();
        let mid = interpolate_at(&traj, 0.5, 2.0).unwrap();
        let q = mid.orientation.expect("orientation interpolated");
        // Halfway: 45 degrees about z.
        assert!((q.angle() - quarter_turn).abs() < 1e-12);
        assert!((q.axis().unwrap().z - 1.0).abs() < 1e-12);
    }

    #[test]
    fn time_offset_shifts_estimate() {
        let dir = tempfile::tempdir().unwrap();
        write_file(&dir, "est.csv", "t,x,y,z\n10.0,0,0,0\n11.0,1,0,0\n");
        write_file(&dir, "ref.csv", "t,x,y,z\n0.0,0,0,0\n1.0,1,0,0\n");
        let manifest_path = write_file(
            &dir,
            "m.json",
            r#"{
  "schema": {"factors": [{"name": "D", "kind": "categorical", "values": ["a"]}]},
  "scenarios": [
    {"id": "s1", "assignment": {"D": "a"},
     "experiments": [{"estimate": {"path": "est.csv", "time_offset": -10.0},
                      "reference": "ref.csv",
                      "evaluation_times": [0.5]}]}
  ]
}"#,
        );
        let manifest = parse_scenario_manifest(&manifest_path).unwrap();
        let scenario = &manifest.datasets[0].scenarios[0];
        let rec = load_experiment(&manifest, scenario, 1, &scenario.experiments[0]).unwrap();
        assert_eq!(rec.estimate.first_time(), 0.0);
        let pairs = sync_pairs(&rec, 2.0).unwrap();
        assert_eq!(pairs.len(), 1);
        assert!((pairs[0].estimate_xy.0 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn interpolation_exact_on_constant_velocity() {
        let traj = line_traj(11, 0.1, 0.3);
        for k in 0..50 {
            let t = 0.01 + k as f64 * 0.019;
            let p = interpolate_at(&traj, t, 1.0).unwrap();
            assert!((p.x - 0.3 * t).abs() < 1e-12);
        }
    }

    fn record_with(times: Vec<f64>) -> ExperimentRecord {
        ExperimentRecord::new("s", 1, line_traj(21, 0.1, 0.3), line_traj(11, 0.2, 0.3), times)
            .unwrap()
    }

    #[test]
    fn sync_pairs_counts_and_errors() {
        let times: Vec<f64> = (0..33).map(|i| 0.05 + i as f64 * 0.05).collect();
        let rec = record_with(times);
        let pairs = sync_pairs(&rec, 0.25).unwrap();
        assert_eq!(pairs.len(), 33);

        assert!(matches!(
            sync_pairs(&record_with(vec![]), 0.25),
            Err(IngestError::EmptyEvaluationSet)
        ));

        let bad = record_with(vec![0.5, 99.0]);
        match sync_pairs(&bad, 0.25) {
            Err(IngestError::Evaluation { index: 1, source }) => {
                assert!(matches!(*source, IngestError::OutOfRange { .. }))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sync_pairs_invariant_to_sampling_rate() {
        // Same constant-velocity path sampled at different rates gives the
        // same pair count and positions at the evaluation times.
        let times: Vec<f64> = (0..10).map(|i| 0.1 + i as f64 * 0.19).collect();
        let fine = ExperimentRecord::new("s", 1, line_traj(41, 0.05, 0.3), line_traj(11, 0.2, 0.3), times.clone()).unwrap();
        let coarse = ExperimentRecord::new("s", 1, line_traj(11, 0.2, 0.3), line_traj(11, 0.2, 0.3), times).unwrap();
        let a = sync_pairs(&fine, 0.25).unwrap();
        let b = sync_pairs(&coarse, 0.25).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!((x.estimate_xy.0 - y.estimate_xy.0).abs() < 1e-12);
        }
    }

    #[test]
    fn manifest_single_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            &dir,
            "m.json",
            r#"{
  "schema": {"factors": [
    {"name": "Dynamics", "kind": "categorical", "values": ["yes", "no"]},
    {"name": "EKF", "kind": "categorical", "values": ["on", "off"]},
    {"name": "Environment", "kind": "categorical", "values": ["empty", "aisle"]}
  ]},
  "scenarios": [
    {"id": "s1", "assignment": {"Dynamics": "yes", "EKF": "on", "Environment": "empty"},
     "experiments": [{"estimate": "est.csv", "reference": "ref.csv", "evaluation_times": [0.5, 1.0]}]}
  ]
}"#,
        );
        let manifest = parse_scenario_manifest(&path).unwrap();
        assert_eq!(manifest.datasets.len(), 1);
        assert_eq!(manifest.datasets[0].schema.factors().len(), 3);
        assert_eq!(manifest.repetitions, DEFAULT_REPETITIONS);
        assert!(manifest.performance_classes.is_none());
    }

    #[test]
    fn manifest_duplicate_id_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            &dir,
            "m.json",
            r#"{
  "schema": {"factors": [{"name": "D", "kind": "categorical", "values": ["a"]}]},
  "scenarios": [
    {"id": "s1", "assignment": {"D": "a"}},
    {"id": "s1", "assignment": {"D": "a"}}
  ]
}"#,
        );
        match parse_scenario_manifest(&path) {
            Err(IngestError::ManifestInvalid(errs)) => {
                assert!(errs
                    .iter()
                    .any(|e| matches!(e, ModelError::DuplicateScenarioId(_))));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn manifest_schema_error_carries_json_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            &dir,
            "m.json",
            r#"{"schema": {"factors": [{"name": "D", "kind": "nonsense"}]}, "scenarios": []}"#,
        );
        match parse_scenario_manifest(&path) {
            Err(IngestError::SchemaError { json_path, .. }) => {
                assert!(json_path.contains("schema"), "path: {json_path}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
