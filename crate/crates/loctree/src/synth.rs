//! Synthetic experiment and dataset generation with known ground truth.
//!
//! The generator emits the same trajectory CSV and manifest JSON the ingest
//! module reads, so the whole pipeline can be exercised end to end against
//! planted targets: a planted tree assigns each scenario a class, a target
//! metric value inside that class drives the noise level, and the resulting
//! dataset should be recovered by evaluate -> categorize -> learn.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtree::{predict, DecisionTree, DtreeError, Node, SplitKind};
use crate::model::{
    ExperimentRecord, Factor, FactorKind, FactorSchema, FactorValue, ModelError,
    PerformanceClass, PerformanceClassScheme, Pose, Scenario, SchemeKind, Trajectory,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("class '{label}' has infeasible value range [{lo}, {hi}]")]
    InfeasibleRange { label: String, lo: f64, hi: f64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dtree(#[from] DtreeError),
}

/// Rayleigh quantile factor: for 2-D isotropic Gaussian noise with per-axis
/// sigma, the q-quantile of the radial error is sigma times this factor.
pub fn rayleigh_quantile_factor(q: f64) -> f64 {
    (-2.0 * (1.0 - q).ln()).sqrt()
}

/// Per-sample estimate noise model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Isotropic Gaussian sigma per axis, meters.
    pub sigma_xy: f64,
    /// Constant offset, meters.
    pub bias: (f64, f64),
    /// Probability of adding a uniform-disc outlier to a sample.
    pub outlier_rate: f64,
    /// Disc radius of outliers, meters.
    pub outlier_scale: f64,
}

impl NoiseSpec {
    pub fn gaussian(sigma_xy: f64) -> Self {
        NoiseSpec {
            sigma_xy,
            bias: (0.0, 0.0),
            outlier_rate: 0.0,
            outlier_scale: 0.0,
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        if self.sigma_xy < 0.0 {
            return Err(SynthError::InvalidPlan("sigma_xy must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.outlier_rate) {
            return Err(SynthError::InvalidPlan(
                "outlier_rate must be in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// One scenario to materialize: factor assignment, noise, and the metric
/// value the noise is tuned to produce.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedScenario {
    pub scenario: Scenario,
    pub label: String,
    pub noise: NoiseSpec,
    pub target_h95: f64,
}

/// Trajectory generation parameters; defaults mirror a slow indoor robot
/// traversing a rectilinear course.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    /// Constant speed along the waypoint polyline, m/s.
    pub speed: f64,
    /// Sampling rate of both trajectories, Hz.
    pub rate: f64,
    /// Number of evaluation poses, spread evenly over the traversal.
    pub eval_count: usize,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            speed: 0.3,
            rate: 10.0,
            eval_count: 33,
        }
    }
}

fn polyline_position(waypoints: &[(f64, f64)], distance: f64) -> (f64, f64) {
    let mut remaining = distance;
    for pair in waypoints.windows(2) {
        let (ax, ay) = pair[0];
        let (bx, by) = pair[1];
        let seg = ((bx - ax).powi(2) + (by - ay).powi(2)).sqrt();
        if remaining <= seg {
            if seg == 0.0 {
                return (ax, ay);
            }
            let f = remaining / seg;
            return (ax + f * (bx - ax), ay + f * (by - ay));
        }
        remaining -= seg;
    }
    *waypoints.last().expect("non-empty waypoints")
}

/// Generates one experiment: the reference is an exact constant-speed
/// traversal of the waypoints, the estimate adds the planted noise, and the
/// evaluation times are the timestamps of evenly spread reference samples
/// (so the error at each evaluation pose is exactly one noise draw).
/// Deterministic given the seed.
pub fn generate_experiment(
    plan: &PlantedScenario,
    repetition: u32,
    waypoints: &[(f64, f64)],
    params: &GenerationParams,
    seed: u64,
) -> Result<ExperimentRecord, SynthError> {
    if waypoints.len() < 2 {
        return Err(SynthError::InvalidPlan(
            "need at least 2 waypoints".into(),
        ));
    }
    if params.rate <= 0.0 || params.speed <= 0.0 || params.rate.is_nan() || params.speed.is_nan() {
        return Err(SynthError::InvalidPlan(
            "rate and speed must be positive".into(),
        ));
    }
    plan.noise.validate()?;

    let total_len: f64 = waypoints
        .windows(2)
        .map(|p| ((p[1].0 - p[0].0).powi(2) + (p[1].1 - p[0].1).powi(2)).sqrt())
        .sum();
    if total_len <= 0.0 {
        return Err(SynthError::InvalidPlan("zero-length path".into()));
    }
    let duration = total_len / params.speed;
    let n_samples = (duration * params.rate).floor() as usize + 1;
    if params.eval_count < 1 || params.eval_count > n_samples {
        return Err(SynthError::InvalidPlan(format!(
            "eval_count {} must be in [1, {n_samples}] for this path and rate",
            params.eval_count
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, plan.noise.sigma_xy)
        .map_err(|e| SynthError::InvalidPlan(e.to_string()))?;

    let mut reference = Vec::with_capacity(n_samples);
    let mut estimate = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let t = i as f64 / params.rate;
        let (x, y) = polyline_position(waypoints, params.speed * t);
        reference.push(Pose::new(t, x, y, 0.0)?);

        let (mut ex, mut ey) = (x + plan.noise.bias.0, y + plan.noise.bias.1);
        if plan.noise.sigma_xy > 0.0 {
            ex += normal.sample(&mut rng);
            ey += normal.sample(&mut rng);
        }
        if plan.noise.outlier_rate > 0.0 && rng.random::<f64>() < plan.noise.outlier_rate {
            let angle = rng.random::<f64>() * std::f64::consts::TAU;
            let radius = plan.noise.outlier_scale * rng.random::<f64>().sqrt();
            ex += radius * angle.cos();
            ey += radius * angle.sin();
        }
        estimate.push(Pose::new(t, ex, ey, 0.0)?);
    }

    let evaluation_times = (0..params.eval_count)
        .map(|k| {
            let idx = if params.eval_count == 1 {
                0
            } else {
                ((k as f64) * (n_samples - 1) as f64 / (params.eval_count - 1) as f64).round()
                    as usize
            };
            reference[idx].t
        })
        .collect();

    let id = &plan.scenario.id;
    Ok(ExperimentRecord::new(
        id.clone(),
        repetition,
        Trajectory::new(format!("{id}-r{repetition}-est"), estimate)?,
        Trajectory::new(format!("{id}-r{repetition}-ref"), reference)?,
        evaluation_times,
    )?)
}

/// Deterministic per-experiment seed derived from the campaign seed.
pub fn derive_seed(master: u64, scenario_id: &str, repetition: u32) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in scenario_id.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    let mut z = master ^ h ^ ((repetition as u64) << 32);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

// ---------------------------------------------------------------------------
// Dataset planting
// ---------------------------------------------------------------------------

/// A factor declaration plus the experiment levels it takes in the factorial.
/// Categorical factors use their declared values as levels; continuous
/// factors must list their levels explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFactor {
    #[serde(flatten)]
    pub factor: Factor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<f64>>,
}

impl PlanFactor {
    fn level_values(&self) -> Result<Vec<FactorValue>, SynthError> {
        match (&self.factor.kind, &self.levels) {
            (FactorKind::Categorical { values }, None) => Ok(values
                .iter()
                .map(|v| FactorValue::Categorical(v.clone()))
                .collect()),
            (FactorKind::Categorical { .. }, Some(_)) => Err(SynthError::InvalidPlan(format!(
                "categorical factor '{}' must not list numeric levels",
                self.factor.name
            ))),
            (FactorKind::Continuous { .. }, Some(levels)) if !levels.is_empty() => {
                Ok(levels.iter().map(|v| FactorValue::Continuous(*v)).collect())
            }
            (FactorKind::Continuous { .. }, _) => Err(SynthError::InvalidPlan(format!(
                "continuous factor '{}' needs explicit levels",
                self.factor.name
            ))),
        }
    }
}

/// One dataset of the campaign: a factor set expanded full-factorially.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetPlan {
    /// Prefix for generated scenario ids, e.g. "uwb-".
    pub id_prefix: String,
    pub factors: Vec<PlanFactor>,
}

impl DatasetPlan {
    pub fn schema(&self) -> Result<FactorSchema, SynthError> {
        Ok(FactorSchema::new(
            self.factors.iter().map(|f| f.factor.clone()).collect(),
        )?)
    }
}

/// Enumerates the full factorial of the dataset's factor levels, in declared
/// order (first factor varies slowest).
pub fn full_factorial(plan: &DatasetPlan) -> Result<Vec<BTreeMap<String, FactorValue>>, SynthError> {
    let mut combos: Vec<BTreeMap<String, FactorValue>> = vec![BTreeMap::new()];
    for pf in &plan.factors {
        let levels = pf.level_values()?;
        let mut next = Vec::with_capacity(combos.len() * levels.len());
        for combo in &combos {
            for level in &levels {
                let mut extended = combo.clone();
                extended.insert(pf.factor.name.clone(), level.clone());
                next.push(extended);
            }
        }
        combos = next;
    }
    Ok(combos)
}

/// Enumerates every factorial combination of the datasets, routes each
/// through the planted tree for its label, and assigns a target metric value
/// uniformly inside that class's range. The Gaussian noise level is set so
/// the expected empirical metric equals the target.
pub fn plant_labeled_dataset(
    tree: &DecisionTree,
    datasets: &[DatasetPlan],
    class_ranges: &BTreeMap<String, (f64, f64)>,
    seed: u64,
) -> Result<Vec<PlantedScenario>, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factor = rayleigh_quantile_factor(0.95);
    let mut out = Vec::new();
    for plan in datasets {
        let combos = full_factorial(plan)?;
        for (i, assignment) in combos.into_iter().enumerate() {
            let label = predict(tree, &assignment)?.label;
            let &(lo, hi) = class_ranges.get(&label).ok_or_else(|| {
                SynthError::InfeasibleRange {
                    label: label.clone(),
                    lo: f64::NAN,
                    hi: f64::NAN,
                }
            })?;
            if !(0.0 <= lo && lo <= hi) {
                return Err(SynthError::InfeasibleRange { label, lo, hi });
            }
            let target_h95 = if lo == hi { lo } else { rng.random_range(lo..=hi) };
            out.push(PlantedScenario {
                scenario: Scenario {
                    id: format!("{}{:03}", plan.id_prefix, i + 1),
                    assignment,
                },
                label,
                noise: NoiseSpec::gaussian(target_h95 / factor),
                target_h95,
            });
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Campaign plans and on-disk materialization
// ---------------------------------------------------------------------------

/// Complete simulation campaign description (JSON-loadable).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationPlan {
    pub seed: u64,
    #[serde(default)]
    pub params: GenerationParams,
    pub repetitions: usize,
    pub waypoints: Vec<(f64, f64)>,
    pub application_classes: PerformanceClassScheme,
    /// Target metric range per planted class label.
    pub class_ranges: BTreeMap<String, (f64, f64)>,
    pub datasets: Vec<DatasetPlan>,
    /// Planted ground-truth tree over the joint factors.
    pub tree: DecisionTree,
}

fn categorical(name: &str, values: &[&str]) -> PlanFactor {
    PlanFactor {
        factor: Factor {
            name: name.into(),
            kind: FactorKind::Categorical {
                values: values.iter().map(|v| v.to_string()).collect(),
            },
        },
        levels: None,
    }
}

fn continuous(name: &str, unit: &str, min: f64, max: f64, levels: &[f64]) -> PlanFactor {
    PlanFactor {
        factor: Factor {
            name: name.into(),
            kind: FactorKind::Continuous {
                unit: unit.into(),
                min,
                max,
            },
        },
        levels: Some(levels.to_vec()),
    }
}

/// Joint factor order of the demo campaign. Shared factors are declared last
/// within each dataset so the joint order keeps system-specific factors
/// ahead of shared ones.
pub fn demo_factor_order() -> Vec<String> {
    ["ILS", "Environment", "EKF", "MapQuality", "FoV", "Reflector", "Dynamics"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

/// Planted tree for application-style classes (A best to D worst) over the
/// demo campaign's two localization systems and their influencing factors.
pub fn demo_application_tree() -> DecisionTree {
    use SplitKind::{Category, Threshold};
    let lidar_low = Node::split(
        "FoV",
        Threshold { threshold: 225.0 },
        Node::leaf("B"),
        Node::split(
            "Reflector",
            Category { value: "off".into() },
            Node::leaf("B"),
            Node::split(
                "Dynamics",
                Category { value: "no".into() },
                Node::leaf("A"),
                Node::leaf("B"),
            ),
        ),
    );
    let lidar_high = Node::split(
        "FoV",
        Threshold { threshold: 225.0 },
        Node::split(
            "Reflector",
            Category { value: "off".into() },
            Node::split(
                "MapQuality",
                Threshold { threshold: 0.915 },
                Node::leaf("B"),
                Node::leaf("A"),
            ),
            Node::leaf("A"),
        ),
        Node::leaf("A"),
    );
    let lidar = Node::split(
        "MapQuality",
        Threshold { threshold: 0.675 },
        lidar_low,
        lidar_high,
    );
    let uwb = Node::split(
        "Environment",
        Category { value: "aisle".into() },
        Node::split(
            "EKF",
            Category { value: "off".into() },
            Node::leaf("D"),
            Node::leaf("C"),
        ),
        Node::leaf("C"),
    );
    let root = Node::split("ILS", Category { value: "LiDAR".into() }, lidar, uwb);
    DecisionTree::from_root(root, demo_factor_order())
}

/// Planted tree for technology-style classes (I best to V worst): like the
/// application tree on the LiDAR side except dynamics never matters, while
/// the UWB side splits one class further on dynamics.
pub fn demo_technology_tree() -> DecisionTree {
    use SplitKind::{Category, Threshold};
    let lidar_low = Node::split(
        "FoV",
        Threshold { threshold: 225.0 },
        Node::leaf("II"),
        Node::split(
            "Reflector",
            Category { value: "off".into() },
            Node::leaf("II"),
            Node::leaf("I"),
        ),
    );
    let lidar_high = Node::split(
        "FoV",
        Threshold { threshold: 225.0 },
        Node::split(
            "Reflector",
            Category { value: "off".into() },
            Node::split(
                "MapQuality",
                Threshold { threshold: 0.915 },
                Node::leaf("II"),
                Node::leaf("I"),
            ),
            Node::leaf("I"),
        ),
        Node::leaf("I"),
    );
    let lidar = Node::split(
        "MapQuality",
        Threshold { threshold: 0.675 },
        lidar_low,
        lidar_high,
    );
    let uwb_aisle = Node::split(
        "EKF",
        Category { value: "off".into() },
        Node::leaf("V"),
        Node::split(
            "Dynamics",
            Category { value: "no".into() },
            Node::leaf("III"),
            Node::leaf("IV"),
        ),
    );
    let uwb_empty = Node::split(
        "EKF",
        Category { value: "off".into() },
        Node::split(
            "Dynamics",
            Category { value: "no".into() },
            Node::leaf("III"),
            Node::leaf("IV"),
        ),
        Node::leaf("III"),
    );
    let uwb = Node::split(
        "Environment",
        Category { value: "aisle".into() },
        uwb_aisle,
        uwb_empty,
    );
    let root = Node::split("ILS", Category { value: "LiDAR".into() }, lidar, uwb);
    DecisionTree::from_root(root, demo_factor_order())
}

/// The demo campaign's dataset plans: one UWB dataset (8 scenarios) and one
/// LiDAR dataset (32 scenarios). Shared factors are declared last.
pub fn demo_datasets() -> Vec<DatasetPlan> {
    vec![
        DatasetPlan {
            id_prefix: "uwb-".into(),
            factors: vec![
                categorical("ILS", &["UWB"]),
                categorical("Environment", &["empty", "aisle"]),
                categorical("EKF", &["on", "off"]),
                categorical("Dynamics", &["yes", "no"]),
            ],
        },
        DatasetPlan {
            id_prefix: "lidar-".into(),
            factors: vec![
                categorical("ILS", &["LiDAR"]),
                continuous("MapQuality", "", 0.0, 1.0, &[0.54, 0.81, 0.84, 0.99]),
                continuous("FoV", "deg", 0.0, 360.0, &[180.0, 270.0]),
                categorical("Reflector", &["on", "off"]),
                categorical("Dynamics", &["yes", "no"]),
            ],
        },
    ]
}

/// Application class scheme of the demo campaign.
pub fn demo_application_scheme() -> PerformanceClassScheme {
    PerformanceClassScheme::new(
        SchemeKind::Application,
        vec![
            PerformanceClass { label: "A".into(), lower: 0.0, upper: 0.05 },
            PerformanceClass { label: "B".into(), lower: 0.05, upper: 0.1 },
            PerformanceClass { label: "C".into(), lower: 0.1, upper: 0.5 },
            PerformanceClass { label: "D".into(), lower: 0.5, upper: 1.0 },
        ],
        "unclassified",
    )
    .expect("valid scheme")
}

/// Class value ranges used when planting application labels. Each range sits
/// inside its class interval with at least 3 standard errors of margin to
/// every boundary: the empirical 95th percentile of 33 Rayleigh draws has
/// se ~ 0.31 sigma, so the 3-repetition mean has se ~ 0.179 sigma ~ 0.073
/// times the target value.
pub fn demo_class_ranges() -> BTreeMap<String, (f64, f64)> {
    BTreeMap::from([
        ("A".to_string(), (0.025, 0.038)),
        ("B".to_string(), (0.068, 0.08)),
        ("C".to_string(), (0.15, 0.35)),
        ("D".to_string(), (0.66, 0.78)),
    ])
}

/// Class value ranges for the technology-label fixtures.
pub fn demo_technology_ranges() -> BTreeMap<String, (f64, f64)> {
    BTreeMap::from([
        ("I".to_string(), (0.02, 0.05)),
        ("II".to_string(), (0.06, 0.2)),
        ("III".to_string(), (0.22, 0.38)),
        ("IV".to_string(), (0.4, 0.48)),
        ("V".to_string(), (0.5, 0.9)),
    ])
}

/// Double-rectangle course with start and end at the center, 26 m long.
pub fn demo_waypoints() -> Vec<(f64, f64)> {
    vec![
        (3.0, 1.5),
        (3.0, 0.0),
        (0.0, 0.0),
        (0.0, 3.0),
        (3.0, 3.0),
        (3.0, 0.0),
        (6.0, 0.0),
        (6.0, 3.0),
        (3.0, 3.0),
        (3.0, 1.5),
    ]
}

/// The built-in campaign: 40 scenarios (8 UWB + 32 LiDAR), 3 repetitions,
/// 33 evaluation poses each — 120 experiments total.
pub fn default_plan(seed: u64) -> SimulationPlan {
    SimulationPlan {
        seed,
        params: GenerationParams::default(),
        repetitions: 3,
        waypoints: demo_waypoints(),
        application_classes: demo_application_scheme(),
        class_ranges: demo_class_ranges(),
        datasets: demo_datasets(),
        tree: demo_application_tree(),
    }
}

/// Loads a campaign plan from JSON.
pub fn load_plan(path: &Path) -> Result<SimulationPlan, SynthError> {
    let text = fs::read_to_string(path).map_err(|source| SynthError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| SynthError::InvalidPlan(e.to_string()))
}

#[derive(Serialize)]
struct ManifestOut<'a> {
    repetitions: usize,
    performance_classes: &'a PerformanceClassScheme,
    datasets: Vec<DatasetOut<'a>>,
}

#[derive(Serialize)]
struct DatasetOut<'a> {
    schema: FactorSchema,
    scenarios: Vec<ScenarioOut<'a>>,
}

#[derive(Serialize)]
struct ScenarioOut<'a> {
    id: &'a str,
    assignment: &'a BTreeMap<String, FactorValue>,
    experiments: Vec<ExperimentOut>,
}

#[derive(Serialize)]
struct ExperimentOut {
    estimate: String,
    reference: String,
    evaluation_times: Vec<f64>,
}

fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<(), SynthError> {
    let mut out = String::from("t,x,y,z\n");
    for p in traj.poses() {
        out.push_str(&format!("{},{},{},{}\n", p.t, p.x, p.y, p.z));
    }
    fs::write(path, out).map_err(|source| SynthError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Materializes a campaign: writes trajectory CSVs and the manifest JSON
/// under `out_dir` and returns the manifest path. Byte-identical for equal
/// plans (including the seed).
pub fn write_dataset(plan: &SimulationPlan, out_dir: &Path) -> Result<PathBuf, SynthError> {
    if plan.repetitions == 0 {
        return Err(SynthError::InvalidPlan("repetitions must be >= 1".into()));
    }
    let planted = plant_labeled_dataset(&plan.tree, &plan.datasets, &plan.class_ranges, plan.seed)?;
    let traj_dir = out_dir.join("trajectories");
    fs::create_dir_all(&traj_dir).map_err(|source| SynthError::Io {
        path: traj_dir.clone(),
        source,
    })?;

    // Scenario id -> experiments, in planted order.
    let mut experiments: BTreeMap<&str, Vec<ExperimentOut>> = BTreeMap::new();
    for scenario in &planted {
        for rep in 1..=plan.repetitions as u32 {
            let seed = derive_seed(plan.seed, &scenario.scenario.id, rep);
            let record =
                generate_experiment(scenario, rep, &plan.waypoints, &plan.params, seed)?;
            let est_name = format!("trajectories/{}_r{}_est.csv", scenario.scenario.id, rep);
            let ref_name = format!("trajectories/{}_r{}_ref.csv", scenario.scenario.id, rep);
            write_trajectory_csv(&out_dir.join(&est_name), &record.estimate)?;
            write_trajectory_csv(&out_dir.join(&ref_name), &record.reference)?;
            experiments
                .entry(scenario.scenario.id.as_str())
                .or_default()
                .push(ExperimentOut {
                    estimate: est_name,
                    reference: ref_name,
                    evaluation_times: record.evaluation_times.clone(),
                });
        }
    }

    let mut datasets_out = Vec::new();
    let mut cursor = 0usize;
    for dataset in &plan.datasets {
        let combo_count: usize = dataset
            .factors
            .iter()
            .map(|f| f.level_values().map(|v| v.len()).unwrap_or(0))
            .product();
        let slice = &planted[cursor..cursor + combo_count];
        cursor += combo_count;
        datasets_out.push(DatasetOut {
            schema: dataset.schema()?,
            scenarios: slice
                .iter()
                .map(|p| ScenarioOut {
                    id: &p.scenario.id,
                    assignment: &p.scenario.assignment,
                    experiments: experiments.remove(p.scenario.id.as_str()).unwrap_or_default(),
                })
                .collect(),
        });
    }

    let manifest = ManifestOut {
        repetitions: plan.repetitions,
        performance_classes: &plan.application_classes,
        datasets: datasets_out,
    };
    let manifest_path = out_dir.join("manifest.json");
    let mut json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| SynthError::InvalidPlan(e.to_string()))?;
    json.push('\n');
    fs::write(&manifest_path, json).map_err(|source| SynthError::Io {
        path: manifest_path.clone(),
        source,
    })?;
    Ok(manifest_path)
}
