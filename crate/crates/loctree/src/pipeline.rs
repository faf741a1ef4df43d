//! File-based pipeline commands behind the CLI: evaluate, categorize, learn,
//! map-quality, simulate, and the report bundle. Each stage reads its
//! predecessor's outputs from the output directory, so stages are
//! independently runnable and reruns are byte-identical for equal inputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;

use crate::align::{icp_fitness, umeyama_align, apply_transform, MapQualityScore, PointCloud2D, SimilarityTransform};
use crate::categorize::{
    classify_application, elbow_select_k, kmeans_1d_exact, roman_labels, scheme_from_clusters,
};
use crate::dtree::{
    join_schemas, learn_tree, relevance, render, DecisionTree, LabeledRecord, Node, RenderFormat,
};
use crate::ingest::{
    load_experiment, parse_point_cloud_csv, parse_scenario_manifest, sync_pairs, Manifest,
    DEFAULT_MAX_GAP,
};
use crate::metrics::{aggregate_scenario, cdf, horizontal_errors, ExperimentMetrics};
use crate::model::{FactorValue, PerformanceClassScheme, ScenarioMetrics, SchemeKind};
use crate::synth::{default_plan, load_plan, write_dataset, SimulationPlan};

/// Which categorization scheme(s) a stage works with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeSelect {
    Application,
    Technology,
    Both,
}

impl SchemeSelect {
    pub fn kinds(&self) -> Vec<SchemeKind> {
        match self {
            SchemeSelect::Application => vec![SchemeKind::Application],
            SchemeSelect::Technology => vec![SchemeKind::Technology],
            SchemeSelect::Both => vec![SchemeKind::Application, SchemeKind::Technology],
        }
    }
}

/// Shared stage configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub out_dir: PathBuf,
    /// Driving percentile fraction (reported in the `h95` column).
    pub percentile_q: f64,
    pub max_gap: f64,
    pub scheme: SchemeSelect,
    pub k_max: usize,
    pub inlier_radius: f64,
    pub seed: u64,
    pub strict: bool,
}

impl RunConfig {
    pub fn new(manifest: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            manifest: manifest.into(),
            out_dir: out_dir.into(),
            percentile_q: 0.95,
            max_gap: DEFAULT_MAX_GAP,
            scheme: SchemeSelect::Both,
            k_max: 8,
            inlier_radius: 0.1,
            seed: 42,
            strict: false,
        }
    }
}

/// Pipeline failure with its process exit code: 2 for configuration or
/// usage problems, 3 for data problems.
#[derive(Debug)]
pub struct PipelineError {
    pub exit_code: i32,
    pub message: String,
}

impl std::fmt::Display for PipelineError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for PipelineError {}

fn config_err(message: impl Into<String>) -> PipelineError {
    PipelineError {
        exit_code: 2,
        message: message.into(),
    }
}

fn data_err(message: impl Into<String>) -> PipelineError {
    PipelineError {
        exit_code: 3,
        message: message.into(),
    }
}

fn write_file(path: &Path, content: &str) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .map_err(|e| data_err(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, content).map_err(|e| data_err(format!("{}: {e}", path.display())))
}

fn load_manifest(config: &RunConfig) -> Result<Manifest, PipelineError> {
    parse_scenario_manifest(&config.manifest)
        .map_err(|e| config_err(format!("manifest {}: {e}", config.manifest.display())))
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct EvaluateSummary {
    pub experiments: usize,
    pub scenarios: usize,
    pub warnings: Vec<String>,
}

/// Fits the calibration transform on the synced pairs of the designated
/// experiment, aligning the estimate frame onto the reference frame.
fn calibration_transform(
    manifest: &Manifest,
    max_gap: f64,
) -> Result<Option<SimilarityTransform>, PipelineError> {
    let Some(cal) = &manifest.calibration else {
        return Ok(None);
    };
    let (_, scenario) = manifest
        .all_scenarios()
        .find(|(_, s)| s.id == cal.scenario)
        .ok_or_else(|| config_err(format!("calibration scenario '{}' not found", cal.scenario)))?;
    let source = scenario
        .experiments
        .get((cal.repetition as usize).saturating_sub(1))
        .ok_or_else(|| {
            config_err(format!(
                "calibration scenario '{}' has no repetition {}",
                cal.scenario, cal.repetition
            ))
        })?;
    let record = load_experiment(manifest, scenario, cal.repetition, source)
        .map_err(|e| data_err(e.to_string()))?;
    let pairs = sync_pairs(&record, max_gap).map_err(|e| data_err(e.to_string()))?;
    let src: Vec<Vector3<f64>> = pairs
        .iter()
        .map(|p| Vector3::new(p.estimate_xy.0, p.estimate_xy.1, 0.0))
        .collect();
    let dst: Vec<Vector3<f64>> = pairs
        .iter()
        .map(|p| Vector3::new(p.reference_xy.0, p.reference_xy.1, 0.0))
        .collect();
    let tf = umeyama_align(&src, &dst, false).map_err(|e| data_err(e.to_string()))?;
    Ok(Some(tf))
}

/// Runs test-and-evaluation over every experiment in the manifest: loads and
/// synchronizes the trajectories, computes per-experiment metrics and CDFs,
/// and aggregates per scenario. Writes `per_experiment.csv`,
/// `scenario_metrics.csv`, and one CDF CSV per experiment.
pub fn cmd_evaluate(config: &RunConfig) -> Result<EvaluateSummary, PipelineError> {
    if !(config.percentile_q > 0.0 && config.percentile_q < 1.0) {
        return Err(config_err(format!(
            "percentile must be inside (0, 1), got {}",
            config.percentile_q
        )));
    }
    let manifest = load_manifest(config)?;
    let calibration = calibration_transform(&manifest, config.max_gap)?;

    let mut per_experiment = String::from("scenario_id,repetition,n_samples,h95,median,mean\n");
    let mut scenario_rows = String::from("scenario_id,repetitions,mean_h95,repeatability\n");
    let mut warnings = Vec::new();
    let mut n_experiments = 0usize;
    let mut n_scenarios = 0usize;

    for (_, scenario) in manifest.all_scenarios() {
        let mut experiment_metrics = Vec::new();
        let mut curves = Vec::new();
        for (i, source) in scenario.experiments.iter().enumerate() {
            let repetition = (i + 1) as u32;
            let mut record = load_experiment(&manifest, scenario, repetition, source)
                .map_err(|e| data_err(e.to_string()))?;
            if let Some(tf) = &calibration {
                record.estimate = apply_transform(tf, &record.estimate);
            }
            let pairs = sync_pairs(&record, config.max_gap).map_err(|e| {
                data_err(format!("scenario '{}' repetition {repetition}: {e}", scenario.id))
            })?;
            let errors = horizontal_errors(&pairs);
            let metrics = ExperimentMetrics::from_errors(
                scenario.id.clone(),
                repetition,
                &errors,
                config.percentile_q,
            )
            .map_err(|e| data_err(e.to_string()))?;
            writeln!(
                per_experiment,
                "{},{},{},{},{},{}",
                metrics.scenario_id,
                metrics.repetition,
                metrics.n_samples,
                metrics.h95,
                metrics.median,
                metrics.mean
            )
            .unwrap();

            let values: Vec<f64> = errors.iter().map(|e| e.horizontal_error).collect();
            let curve = cdf(&values).map_err(|e| data_err(e.to_string()))?;
            let mut cdf_csv = String::from("error,fraction\n");
            for (err, frac) in curve.points() {
                writeln!(cdf_csv, "{err},{frac}").unwrap();
            }
            write_file(
                &config
                    .out_dir
                    .join("cdf")
                    .join(format!("{}_r{}.csv", scenario.id, repetition)),
                &cdf_csv,
            )?;
            curves.push(curve);
            experiment_metrics.push(metrics);
            n_experiments += 1;
        }
        if experiment_metrics.is_empty() {
            warnings.push(format!("scenario '{}' has no experiments", scenario.id));
            continue;
        }
        let (agg, shortfall) = aggregate_scenario(&experiment_metrics, manifest.repetitions)
            .map_err(|e| data_err(e.to_string()))?;
        if let Some(s) = shortfall {
            warnings.push(format!(
                "scenario '{}' has {} repetitions, manifest declares {}",
                s.scenario_id, s.actual, s.declared
            ));
        }
        let repeatability_field = if curves.len() >= 2 {
            format!(
                "{}",
                crate::metrics::repeatability(&curves).map_err(|e| data_err(e.to_string()))?
            )
        } else {
            String::new()
        };
        writeln!(
            scenario_rows,
            "{},{},{},{}",
            agg.scenario_id,
            agg.per_repetition_h95.len(),
            agg.mean_h95,
            repeatability_field
        )
        .unwrap();
        n_scenarios += 1;
    }

    write_file(&config.out_dir.join("per_experiment.csv"), &per_experiment)?;
    write_file(&config.out_dir.join("scenario_metrics.csv"), &scenario_rows)?;
    Ok(EvaluateSummary {
        experiments: n_experiments,
        scenarios: n_scenarios,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// categorize
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct CategorizeSummary {
    pub labeled: usize,
    pub technology_k: Option<usize>,
}

fn read_scenario_metrics(out_dir: &Path) -> Result<Vec<ScenarioMetrics>, PipelineError> {
    let path = out_dir.join("scenario_metrics.csv");
    let text = fs::read_to_string(&path).map_err(|e| {
        config_err(format!(
            "{}: {e} (run `evaluate` first)",
            path.display()
        ))
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 3 {
            return Err(data_err(format!("{}:{}: malformed row", path.display(), i + 1)));
        }
        let mean: f64 = fields[2]
            .parse()
            .map_err(|_| data_err(format!("{}:{}: bad mean_h95", path.display(), i + 1)))?;
        out.push(
            ScenarioMetrics::new(fields[0].to_string(), vec![mean])
                .map_err(|e| data_err(e.to_string()))?,
        );
    }
    if out.is_empty() {
        return Err(data_err(format!("{}: no scenarios", path.display())));
    }
    Ok(out)
}

fn scheme_json(scheme: &PerformanceClassScheme) -> String {
    let mut json = serde_json::to_string_pretty(scheme).expect("scheme serializes");
    json.push('\n');
    json
}

/// Labels every scenario. Application mode uses the manifest's class table;
/// technology mode derives a scheme by elbow-selected exact 1-D clustering
/// of the scenario metric values. Writes `categorized.csv` (long form, one
/// row per scenario and scheme), `scheme_<kind>.json`, and, when both
/// schemes run, `categorized_wide.csv` with the labels side by side.
pub fn cmd_categorize(config: &RunConfig) -> Result<CategorizeSummary, PipelineError> {
    let manifest = load_manifest(config)?;
    let scenarios = read_scenario_metrics(&config.out_dir)?;
    let kinds = config.scheme.kinds();

    let mut labeled: BTreeMap<SchemeKind, Vec<ScenarioMetrics>> = BTreeMap::new();
    let mut technology_k = None;

    for kind in &kinds {
        match kind {
            SchemeKind::Application => {
                let scheme = manifest.performance_classes.clone().ok_or_else(|| {
                    config_err("manifest declares no `performance_classes` for application mode")
                })?;
                write_file(
                    &config.out_dir.join("scheme_application.json"),
                    &scheme_json(&scheme),
                )?;
                let rows = scenarios
                    .iter()
                    .map(|m| classify_application(m, &scheme))
                    .collect();
                labeled.insert(SchemeKind::Application, rows);
            }
            SchemeKind::Technology => {
                let values: Vec<f64> = scenarios.iter().map(|m| m.mean_h95).collect();
                let k_max = effective_k_max(config.k_max, values.len())?;
                let k = elbow_select_k(&values, k_max).map_err(|e| data_err(e.to_string()))?;
                technology_k = Some(k);
                let clustering =
                    kmeans_1d_exact(&values, k).map_err(|e| data_err(e.to_string()))?;
                let scheme = scheme_from_clusters(&clustering, &roman_labels(k))
                    .map_err(|e| data_err(e.to_string()))?;
                write_file(
                    &config.out_dir.join("scheme_technology.json"),
                    &scheme_json(&scheme),
                )?;
                let rows = scenarios
                    .iter()
                    .map(|m| classify_application(m, &scheme))
                    .collect();
                labeled.insert(SchemeKind::Technology, rows);
            }
        }
    }

    let mut long = String::from("scenario_id,mean_h95,class_label,scheme_kind\n");
    for kind in &kinds {
        for m in &labeled[kind] {
            writeln!(
                long,
                "{},{},{},{kind}",
                m.scenario_id,
                m.mean_h95,
                m.class_label.as_deref().unwrap_or("")
            )
            .unwrap();
        }
    }
    write_file(&config.out_dir.join("categorized.csv"), &long)?;

    if kinds.len() == 2 {
        let app = &labeled[&SchemeKind::Application];
        let tech = &labeled[&SchemeKind::Technology];
        let mut wide = String::from("scenario_id,mean_h95,application,technology\n");
        for (a, t) in app.iter().zip(tech) {
            writeln!(
                wide,
                "{},{},{},{}",
                a.scenario_id,
                a.mean_h95,
                a.class_label.as_deref().unwrap_or(""),
                t.class_label.as_deref().unwrap_or("")
            )
            .unwrap();
        }
        write_file(&config.out_dir.join("categorized_wide.csv"), &wide)?;
    }

    Ok(CategorizeSummary {
        labeled: scenarios.len(),
        technology_k,
    })
}

/// Clamp k_max to the data size when the scenario count is small; the elbow
/// needs strictly more values than k_max and a range of at least [2, k_max-1].
fn effective_k_max(k_max: usize, n: usize) -> Result<usize, PipelineError> {
    let clamped = k_max.min(n.saturating_sub(1));
    if clamped < 3 {
        return Err(config_err(format!(
            "technology categorization needs at least 4 scenarios, got {n}"
        )));
    }
    Ok(clamped)
}

// ---------------------------------------------------------------------------
// learn
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct LearnSummary {
    pub trees: Vec<(SchemeKind, DecisionTree)>,
    pub impure_leaves: usize,
}

fn read_categorized(
    out_dir: &Path,
) -> Result<Vec<(String, f64, String, SchemeKind)>, PipelineError> {
    let path = out_dir.join("categorized.csv");
    let text = fs::read_to_string(&path).map_err(|e| {
        config_err(format!("{}: {e} (run `categorize` first)", path.display()))
    })?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(data_err(format!("{}:{}: malformed row", path.display(), i + 1)));
        }
        let kind = match fields[3] {
            "application" => SchemeKind::Application,
            "technology" => SchemeKind::Technology,
            other => {
                return Err(data_err(format!(
                    "{}:{}: unknown scheme kind '{other}'",
                    path.display(),
                    i + 1
                )))
            }
        };
        let mean: f64 = fields[1]
            .parse()
            .map_err(|_| data_err(format!("{}:{}: bad mean_h95", path.display(), i + 1)))?;
        rows.push((fields[0].to_string(), mean, fields[2].to_string(), kind));
    }
    Ok(rows)
}

fn count_impure(node: &Node) -> usize {
    match node {
        Node::Leaf { impure, .. } => usize::from(*impure),
        Node::Split { left, right, .. } => count_impure(left) + count_impure(right),
    }
}

fn factor_usage(node: &Node, usage: &mut BTreeMap<String, usize>) {
    if let Node::Split { test, left, right } = node {
        *usage.entry(test.factor.clone()).or_insert(0) += 1;
        factor_usage(left, usage);
        factor_usage(right, usage);
    }
}

/// Learns one decision tree per labeled scheme from the categorized report
/// joined with the manifest's factor assignments. Writes
/// `tree_<kind>.{json,dot,txt}`, `relevance_<kind>.csv`, and
/// `factor_usage_<kind>.csv`. With `strict`, inconsistent labels (an impure
/// leaf) abort with a configuration error.
pub fn cmd_learn(config: &RunConfig) -> Result<LearnSummary, PipelineError> {
    let manifest = load_manifest(config)?;
    let categorized = read_categorized(&config.out_dir)?;

    let schemas: Vec<&crate::model::FactorSchema> =
        manifest.datasets.iter().map(|d| &d.schema).collect();
    let joint = join_schemas(&schemas).map_err(|e| config_err(e.to_string()))?;

    let assignments: BTreeMap<&str, &BTreeMap<String, FactorValue>> = manifest
        .all_scenarios()
        .map(|(_, s)| (s.id.as_str(), &s.assignment))
        .collect();

    let wanted = config.scheme.kinds();
    let mut summary = LearnSummary {
        trees: Vec::new(),
        impure_leaves: 0,
    };

    for kind in wanted {
        let records: Vec<LabeledRecord> = categorized
            .iter()
            .filter(|(_, _, _, k)| *k == kind)
            .map(|(id, _, label, _)| {
                let features = assignments.get(id.as_str()).ok_or_else(|| {
                    data_err(format!("scenario '{id}' in categorized.csv is not in the manifest"))
                })?;
                Ok(LabeledRecord {
                    features: (*features).clone(),
                    label: label.clone(),
                })
            })
            .collect::<Result<_, PipelineError>>()?;
        if records.is_empty() {
            continue;
        }
        let tree = learn_tree(&records, &joint).map_err(|e| data_err(e.to_string()))?;
        let impure = count_impure(&tree.root);
        summary.impure_leaves += impure;
        if config.strict && impure > 0 {
            return Err(config_err(format!(
                "{impure} impure leaf/leaves under --strict: labels are inconsistent for identical factor combinations"
            )));
        }

        write_file(
            &config.out_dir.join(format!("tree_{kind}.json")),
            &render(&tree, RenderFormat::Json),
        )?;
        write_file(
            &config.out_dir.join(format!("tree_{kind}.dot")),
            &render(&tree, RenderFormat::Dot),
        )?;
        write_file(
            &config.out_dir.join(format!("tree_{kind}.txt")),
            &render(&tree, RenderFormat::Text),
        )?;

        let mut rel_csv = String::from("leaf,label,support,impure,relevant,irrelevant\n");
        for leaf in relevance(&tree) {
            writeln!(
                rel_csv,
                "{},{},{},{},{},{}",
                leaf.leaf_id,
                leaf.label,
                leaf.support,
                leaf.impure,
                leaf.relevant.join(";"),
                leaf.irrelevant.join(";")
            )
            .unwrap();
        }
        write_file(&config.out_dir.join(format!("relevance_{kind}.csv")), &rel_csv)?;

        let mut usage = BTreeMap::new();
        factor_usage(&tree.root, &mut usage);
        let mut usage_csv = String::from("factor,n_nodes\n");
        for factor in joint.factors() {
            writeln!(
                usage_csv,
                "{},{}",
                factor.name,
                usage.get(&factor.name).copied().unwrap_or(0)
            )
            .unwrap();
        }
        write_file(
            &config.out_dir.join(format!("factor_usage_{kind}.csv")),
            &usage_csv,
        )?;

        summary.trees.push((kind, tree));
    }
    Ok(summary)
}

// ---------------------------------------------------------------------------
// map-quality
// ---------------------------------------------------------------------------

/// Scores how well two 2-D contour maps match: global registration, ICP
/// refinement, then the inlier fraction within the radius. Optionally writes
/// a JSON report with the row-major rotation, translation, and scale.
pub fn cmd_map_quality(
    map_a: &Path,
    map_b: &Path,
    inlier_radius: f64,
    max_iters: usize,
    report_out: Option<&Path>,
) -> Result<MapQualityScore, PipelineError> {
    let src = PointCloud2D::new(
        parse_point_cloud_csv(map_a).map_err(|e| data_err(e.to_string()))?,
    )
    .map_err(|e| data_err(format!("{}: {e}", map_a.display())))?;
    let dst = PointCloud2D::new(
        parse_point_cloud_csv(map_b).map_err(|e| data_err(e.to_string()))?,
    )
    .map_err(|e| data_err(format!("{}: {e}", map_b.display())))?;
    let score =
        icp_fitness(&src, &dst, inlier_radius, max_iters).map_err(|e| data_err(e.to_string()))?;
    if let Some(path) = report_out {
        write_file(path, &map_quality_report_json(&score))?;
    }
    Ok(score)
}

/// JSON report for a map-quality score; rotation is row-major.
pub fn map_quality_report_json(score: &MapQualityScore) -> String {
    let rows = score.transform.rotation_rows();
    let t = &score.transform.translation;
    let value = serde_json::json!({
        "fitness": score.fitness,
        "inlier_rmse": score.inlier_rmse,
        "inlier_radius": score.inlier_radius,
        "transform": {
            "rotation": rows,
            "translation": [t.x, t.y, t.z],
            "scale": score.transform.scale,
        },
    });
    let mut out = serde_json::to_string_pretty(&value).expect("report serializes");
    out.push('\n');
    out
}

// ---------------------------------------------------------------------------
// simulate and report
// ---------------------------------------------------------------------------

/// Materializes a synthetic campaign. With no plan file, the built-in
/// 40-scenario, 120-experiment campaign is generated. Returns the manifest
/// path.
pub fn cmd_simulate(
    plan_path: Option<&Path>,
    out_dir: &Path,
    seed: Option<u64>,
) -> Result<PathBuf, PipelineError> {
    let mut plan: SimulationPlan = match plan_path {
        Some(path) => load_plan(path).map_err(|e| config_err(e.to_string()))?,
        None => default_plan(seed.unwrap_or(42)),
    };
    if let Some(seed) = seed {
        plan.seed = seed;
    }
    write_dataset(&plan, out_dir).map_err(|e| match e {
        crate::synth::SynthError::Io { .. } => data_err(e.to_string()),
        other => config_err(other.to_string()),
    })
}

/// evaluate -> categorize -> learn in one call.
pub fn cmd_report(config: &RunConfig) -> Result<(EvaluateSummary, CategorizeSummary, LearnSummary), PipelineError> {
    let eval = cmd_evaluate(config)?;
    let cat = cmd_categorize(config)?;
    let learn = cmd_learn(config)?;
    Ok((eval, cat, learn))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn effective_k_max_clamps() {
        assert_eq!(effective_k_max(8, 40).unwrap(), 8);
        assert_eq!(effective_k_max(8, 6).unwrap(), 5);
        assert!(effective_k_max(8, 3).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(config_err("x").exit_code, 2);
        assert_eq!(data_err("x").exit_code, 3);
    }
}
