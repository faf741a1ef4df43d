//! Shared domain types: poses, trajectories, factor schemas, scenarios,
//! experiment records, per-scenario metrics, and performance-class schemes.
//!
//! All types are immutable after construction and validated up front, so the
//! rest of the pipeline can consume them without re-checking invariants.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for the unit-norm check on input quaternions.
pub const QUAT_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("pose timestamp must be finite, got {0}")]
    NonFiniteTimestamp(f64),
    #[error("pose position must be finite at t={0}")]
    NonFinitePosition(f64),
    #[error("quaternion norm {norm} deviates from 1 by more than {QUAT_NORM_TOL}")]
    NonUnitQuaternion { norm: f64 },
    #[error("trajectory '{source_id}' timestamps not strictly increasing at index {index}")]
    NonMonotoneTrajectory { source_id: String, index: usize },
    #[error("trajectory '{source_id}' is empty")]
    EmptyTrajectory { source_id: String },
    #[error("duplicate factor name '{0}' in schema")]
    DuplicateFactor(String),
    #[error("categorical factor '{0}' declares no allowed values")]
    EmptyValueList(String),
    #[error("continuous factor '{name}' has min {min} >= max {max}")]
    InvalidBounds { name: String, min: f64, max: f64 },
    #[error("scenario '{scenario}' assigns unknown factor '{factor}'")]
    UnknownFactor { scenario: String, factor: String },
    #[error("scenario '{scenario}' is missing factor '{factor}'")]
    MissingFactor { scenario: String, factor: String },
    #[error("scenario '{scenario}' factor '{factor}': {reason}")]
    ValueOutOfDomain {
        scenario: String,
        factor: String,
        reason: String,
    },
    #[error("duplicate scenario id '{0}'")]
    DuplicateScenarioId(String),
    #[error("repetition index must be >= 1")]
    InvalidRepetitionIndex,
    #[error("evaluation times must be sorted (violation at index {0})")]
    UnsortedEvaluationTimes(usize),
    #[error("performance classes must start at 0, be contiguous and strictly increasing: {0}")]
    InvalidClassScheme(String),
    #[error("scenario metrics for '{0}' are empty")]
    EmptyMetrics(String),
}

/// One timestamped sample of a localization source.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    /// Time in seconds, monotone within a trajectory.
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Optional attitude; unit norm is enforced on construction.
    pub orientation: Option<UnitQuaternion<f64>>,
}

impl Pose {
    pub fn new(t: f64, x: f64, y: f64, z: f64) -> Result<Self, ModelError> {
        if !t.is_finite() {
            return Err(ModelError::NonFiniteTimestamp(t));
        }
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(ModelError::NonFinitePosition(t));
        }
        Ok(Pose {
            t,
            x,
            y,
            z,
            orientation: None,
        })
    }

    /// Builds a pose carrying an orientation given as (w, x, y, z).
    /// The quaternion must already be unit within [`QUAT_NORM_TOL`]; it is
    /// renormalized exactly afterwards.
    pub fn with_orientation(
        t: f64,
        x: f64,
        y: f64,
        z: f64,
        wxyz: [f64; 4],
    ) -> Result<Self, ModelError> {
        let mut pose = Pose::new(t, x, y, z)?;
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        let norm = q.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > QUAT_NORM_TOL {
            return Err(ModelError::NonUnitQuaternion { norm });
        }
        pose.orientation = Some(UnitQuaternion::from_quaternion(q));
        Ok(pose)
    }

    pub fn xy(&self) -> (f64, f64) {
        (self.x, self.y)
    }
}

/// Ordered pose sequence from a single source (system under test or reference).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub source_id: String,
    poses: Vec<Pose>,
}

impl Trajectory {
    pub fn new(source_id: impl Into<String>, poses: Vec<Pose>) -> Result<Self, ModelError> {
        let source_id = source_id.into();
        if poses.is_empty() {
            return Err(ModelError::EmptyTrajectory { source_id });
        }
        for (i, pair) in poses.windows(2).enumerate() {
            if pair[1].t <= pair[0].t {
                return Err(ModelError::NonMonotoneTrajectory {
                    source_id,
                    index: i + 1,
                });
            }
        }
        Ok(Trajectory { source_id, poses })
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn first_time(&self) -> f64 {
        self.poses[0].t
    }

    pub fn last_time(&self) -> f64 {
        self.poses[self.poses.len() - 1].t
    }

    /// Shifts every timestamp by a constant offset (clock correction).
    pub fn shift_time(mut self, offset: f64) -> Self {
        for p in &mut self.poses {
            p.t += offset;
        }
        self
    }

    /// Maps every position (and orientation, if present) through `f`.
    pub(crate) fn map_poses(mut self, f: impl Fn(&Pose) -> Pose) -> Self {
        self.poses = self.poses.iter().map(f).collect();
        self
    }
}

/// Kind of an influencing factor: a closed value list or a bounded scalar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FactorKind {
    Categorical { values: Vec<String> },
    Continuous { unit: String, min: f64, max: f64 },
}

/// Declaration of one influencing factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub name: String,
    #[serde(flatten)]
    pub kind: FactorKind,
}

/// Ordered factor declarations. The declaration order doubles as the
/// tie-break order for decision-tree splits, so it is part of the contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema", into = "RawSchema")]
pub struct FactorSchema {
    factors: Vec<Factor>,
}

#[derive(Serialize, Deserialize)]
struct RawSchema {
    factors: Vec<Factor>,
}

impl TryFrom<RawSchema> for FactorSchema {
    type Error = ModelError;
    fn try_from(raw: RawSchema) -> Result<Self, ModelError> {
        FactorSchema::new(raw.factors)
    }
}

impl From<FactorSchema> for RawSchema {
    fn from(s: FactorSchema) -> Self {
        RawSchema { factors: s.factors }
    }
}

impl FactorSchema {
    pub fn new(factors: Vec<Factor>) -> Result<Self, ModelError> {
        let mut seen = BTreeSet::new();
        for f in &factors {
            if !seen.insert(f.name.clone()) {
                return Err(ModelError::DuplicateFactor(f.name.clone()));
            }
            match &f.kind {
                FactorKind::Categorical { values } => {
                    if values.is_empty() {
                        return Err(ModelError::EmptyValueList(f.name.clone()));
                    }
                }
                FactorKind::Continuous { min, max, .. } => {
                    if min >= max || min.is_nan() || max.is_nan() {
                        return Err(ModelError::InvalidBounds {
                            name: f.name.clone(),
                            min: *min,
                            max: *max,
                        });
                    }
                }
            }
        }
        Ok(FactorSchema { factors })
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn factor(&self, name: &str) -> Option<&Factor> {
        self.factors.iter().find(|f| f.name == name)
    }
}

/// A concrete factor value carried by a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FactorValue {
    Categorical(String),
    Continuous(f64),
}

impl FactorValue {
    pub fn as_text(&self) -> Option<&str> {
        match self {
            FactorValue::Categorical(s) => Some(s),
            FactorValue::Continuous(_) => None,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            FactorValue::Continuous(v) => Some(*v),
            FactorValue::Categorical(_) => None,
        }
    }
}

impl std::fmt::Display for FactorValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FactorValue::Categorical(s) => write!(f, "{s}"),
            FactorValue::Continuous(v) => write!(f, "{v}"),
        }
    }
}

/// One complete assignment of values to a schema's factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub assignment: BTreeMap<String, FactorValue>,
}

impl Scenario {
    /// Checks this scenario against `schema`, pushing every violation into `out`.
    fn check(&self, schema: &FactorSchema, out: &mut Vec<ModelError>) {
        for name in self.assignment.keys() {
            if schema.factor(name).is_none() {
                out.push(ModelError::UnknownFactor {
                    scenario: self.id.clone(),
                    factor: name.clone(),
                });
            }
        }
        for factor in schema.factors() {
            match self.assignment.get(&factor.name) {
                None => out.push(ModelError::MissingFactor {
                    scenario: self.id.clone(),
                    factor: factor.name.clone(),
                }),
                Some(value) => {
                    if let Some(reason) = domain_violation(factor, value) {
                        out.push(ModelError::ValueOutOfDomain {
                            scenario: self.id.clone(),
                            factor: factor.name.clone(),
                            reason,
                        });
                    }
                }
            }
        }
    }
}

/// Returns a description of why `value` does not conform to `factor`, or None.
pub fn domain_violation(factor: &Factor, value: &FactorValue) -> Option<String> {
    match (&factor.kind, value) {
        (FactorKind::Categorical { values }, FactorValue::Categorical(v)) => {
            if values.iter().any(|a| a == v) {
                None
            } else {
                Some(format!("'{v}' not among allowed values {values:?}"))
            }
        }
        (FactorKind::Continuous { min, max, .. }, FactorValue::Continuous(v)) => {
            if v.is_finite() && *min <= *v && *v <= *max {
                None
            } else {
                Some(format!("{v} outside [{min}, {max}]"))
            }
        }
        (FactorKind::Categorical { .. }, FactorValue::Continuous(v)) => {
            Some(format!("expected categorical value, got number {v}"))
        }
        (FactorKind::Continuous { .. }, FactorValue::Categorical(v)) => {
            Some(format!("expected numeric value, got '{v}'"))
        }
    }
}

/// Validates a scenario set against a schema. Returns `Ok` only when every
/// scenario conforms; otherwise reports every violation found, not just the
/// first. Re-validating an accepted set is idempotent.
pub fn validate_manifest(
    schema: &FactorSchema,
    scenarios: &[Scenario],
) -> Result<(), Vec<ModelError>> {
    let mut errors = Vec::new();
    let mut ids = BTreeSet::new();
    for s in scenarios {
        if !ids.insert(s.id.clone()) {
            errors.push(ModelError::DuplicateScenarioId(s.id.clone()));
        }
        s.check(schema, &mut errors);
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

/// One executed experiment: a scenario repetition with both recorded
/// trajectories and the times at which they are compared.
#[derive(Debug, Clone)]
pub struct ExperimentRecord {
    pub scenario_id: String,
    /// 1-based repetition index.
    pub repetition_index: u32,
    pub estimate: Trajectory,
    pub reference: Trajectory,
    pub evaluation_times: Vec<f64>,
}

impl ExperimentRecord {
    pub fn new(
        scenario_id: impl Into<String>,
        repetition_index: u32,
        estimate: Trajectory,
        reference: Trajectory,
        evaluation_times: Vec<f64>,
    ) -> Result<Self, ModelError> {
        if repetition_index < 1 {
            return Err(ModelError::InvalidRepetitionIndex);
        }
        for (i, pair) in evaluation_times.windows(2).enumerate() {
            if pair[1] < pair[0] {
                return Err(ModelError::UnsortedEvaluationTimes(i + 1));
            }
        }
        Ok(ExperimentRecord {
            scenario_id: scenario_id.into(),
            repetition_index,
            estimate,
            reference,
            evaluation_times,
        })
    }
}

/// Per-scenario aggregate of the horizontal-error percentile metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMetrics {
    pub scenario_id: String,
    pub per_repetition_h95: Vec<f64>,
    /// Arithmetic mean of `per_repetition_h95`.
    pub mean_h95: f64,
    pub class_label: Option<String>,
}

impl ScenarioMetrics {
    pub fn new(
        scenario_id: impl Into<String>,
        per_repetition_h95: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let scenario_id = scenario_id.into();
        if per_repetition_h95.is_empty() {
            return Err(ModelError::EmptyMetrics(scenario_id));
        }
        let mean_h95 = per_repetition_h95.iter().sum::<f64>() / per_repetition_h95.len() as f64;
        Ok(ScenarioMetrics {
            scenario_id,
            per_repetition_h95,
            mean_h95,
            class_label: None,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.class_label = Some(label.into());
        self
    }
}

/// How a class scheme was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    /// Thresholds fixed by application requirements.
    Application,
    /// Thresholds derived from clustering the observed metric values.
    Technology,
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SchemeKind::Application => write!(f, "application"),
            SchemeKind::Technology => write!(f, "technology"),
        }
    }
}

/// One labeled half-open accuracy interval `[lower, upper)` in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceClass {
    pub label: String,
    pub lower: f64,
    pub upper: f64,
}

/// Ordered, contiguous class intervals plus an overflow label for values at
/// or beyond the last upper bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScheme", into = "RawScheme")]
pub struct PerformanceClassScheme {
    pub kind: SchemeKind,
    classes: Vec<PerformanceClass>,
    pub overflow_label: String,
}

#[derive(Serialize, Deserialize)]
struct RawScheme {
    kind: SchemeKind,
    classes: Vec<PerformanceClass>,
    overflow_label: String,
}

impl TryFrom<RawScheme> for PerformanceClassScheme {
    type Error = ModelError;
    fn try_from(raw: RawScheme) -> Result<Self, ModelError> {
        PerformanceClassScheme::new(raw.kind, raw.classes, raw.overflow_label)
    }
}

impl From<PerformanceClassScheme> for RawScheme {
    fn from(s: PerformanceClassScheme) -> Self {
        RawScheme {
            kind: s.kind,
            classes: s.classes,
            overflow_label: s.overflow_label,
        }
    }
}

impl PerformanceClassScheme {
    pub fn new(
        kind: SchemeKind,
        classes: Vec<PerformanceClass>,
        overflow_label: impl Into<String>,
    ) -> Result<Self, ModelError> {
        if let Some(first) = classes.first() {
            if first.lower != 0.0 {
                return Err(ModelError::InvalidClassScheme(format!(
                    "first lower bound is {}, expected 0",
                    first.lower
                )));
            }
        }
        for c in &classes {
            if c.lower >= c.upper || c.lower.is_nan() || c.upper.is_nan() {
                return Err(ModelError::InvalidClassScheme(format!(
                    "class '{}' has empty interval [{}, {})",
                    c.label, c.lower, c.upper
                )));
            }
        }
        for pair in classes.windows(2) {
            if pair[1].lower != pair[0].upper {
                return Err(ModelError::InvalidClassScheme(format!(
                    "gap between '{}' (upper {}) and '{}' (lower {})",
                    pair[0].label, pair[0].upper, pair[1].label, pair[1].lower
                )));
            }
        }
        Ok(PerformanceClassScheme {
            kind,
            classes,
            overflow_label: overflow_label.into(),
        })
    }

    pub fn classes(&self) -> &[PerformanceClass] {
        &self.classes
    }

    /// Label for a metric value: the class whose `[lower, upper)` contains it,
    /// or the overflow label at and beyond the last upper bound.
    pub fn label_for(&self, value: f64) -> &str {
        for c in &self.classes {
            if c.lower <= value && value < c.upper {
                return &c.label;
            }
        }
        &self.overflow_label
    }

    /// Ordered labels, overflow last.
    pub fn labels(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.classes.iter().map(|c| c.label.as_str()).collect();
        out.push(&self.overflow_label);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(factors: Vec<Factor>) -> FactorSchema {
        FactorSchema::new(factors).unwrap()
    }

    fn categorical(name: &str, values: &[&str]) -> Factor {
        Factor {
            name: name.into(),
            kind: FactorKind::Categorical {
                values: values.iter().map(|v| v.to_string()).collect(),
            },
        }
    }

    fn continuous(name: &str, unit: &str, min: f64, max: f64) -> Factor {
        Factor {
            name: name.into(),
            kind: FactorKind::Continuous {
                unit: unit.into(),
                min,
                max,
            },
        }
    }

    fn scenario(id: &str, pairs: &[(&str, FactorValue)]) -> Scenario {
        Scenario {
            id: id.into(),
            assignment: pairs
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
        }
    }

    #[test]
    fn conforming_scenario_accepted() {
        let s = schema(vec![categorical("Dynamics", &["yes", "no"])]);
        let sc = scenario(
            "a",
            &[("Dynamics", FactorValue::Categorical("yes".into()))],
        );
        assert!(validate_manifest(&s, &[sc]).is_ok());
    }

    #[test]
    fn continuous_bound_violation_rejected() {
        let s = schema(vec![continuous("FoV", "deg", 0.0, 360.0)]);
        let sc = scenario("a", &[("FoV", FactorValue::Continuous(400.0))]);
        let errs = validate_manifest(&s, &[sc]).unwrap_err();
        assert!(matches!(errs[0], ModelError::ValueOutOfDomain { .. }));
    }

    #[test]
    fn full_factorial_lidar_schema_counts() {
        // Four factors with 2*2*2*4 value combinations.
        let s = schema(vec![
            categorical("Dynamics", &["yes", "no"]),
            categorical("Reflector", &["on", "off"]),
            continuous("FoV", "deg", 0.0, 360.0),
            continuous("MapQuality", "", 0.0, 1.0),
        ]);
        let fovs = [180.0, 270.0];
        let mqs = [0.54, 0.81, 0.84, 0.99];
        let mut scenarios = Vec::new();
        for d in ["yes", "no"] {
            for r in ["on", "off"] {
                for f in fovs {
                    for m in mqs {
                        let id = format!("{d}-{r}-{f}-{m}");
                        scenarios.push(scenario(
                            &id,
                            &[
                                ("Dynamics", FactorValue::Categorical(d.into())),
                                ("Reflector", FactorValue::Categorical(r.into())),
                                ("FoV", FactorValue::Continuous(f)),
                                ("MapQuality", FactorValue::Continuous(m)),
                            ],
                        ));
                    }
                }
            }
        }
        assert_eq!(scenarios.len(), 32);
        assert!(validate_manifest(&s, &scenarios).is_ok());
        // Idempotent on an accepted set.
        assert!(validate_manifest(&s, &scenarios).is_ok());
    }

    #[test]
    fn all_violations_reported() {
        let s = schema(vec![
            categorical("Dynamics", &["yes", "no"]),
            continuous("FoV", "deg", 0.0, 360.0),
        ]);
        let bad = scenario(
            "a",
            &[
                ("Dynamics", FactorValue::Categorical("maybe".into())),
                ("Ghost", FactorValue::Continuous(1.0)),
            ],
        );
        let dup = scenario(
            "a",
            &[
                ("Dynamics", FactorValue::Categorical("yes".into())),
                ("FoV", FactorValue::Continuous(90.0)),
            ],
        );
        let errs = validate_manifest(&s, &[bad, dup]).unwrap_err();
        // unknown factor + bad value + missing FoV + duplicate id
        assert_eq!(errs.len(), 4);
    }

    #[test]
    fn trajectory_rejects_non_monotone() {
        let poses = vec![
            Pose::new(0.0, 0.0, 0.0, 0.0).unwrap(),
            Pose::new(0.0, 1.0, 0.0, 0.0).unwrap(),
        ];
        assert!(matches!(
            Trajectory::new("x", poses),
            Err(ModelError::NonMonotoneTrajectory { index: 1, .. })
        ));
    }

    #[test]
    fn quaternion_norm_checked() {
        assert!(Pose::with_orientation(0.0, 0.0, 0.0, 0.0, [1.0, 0.0, 0.0, 0.0]).is_ok());
        assert!(matches!(
            Pose::with_orientation(0.0, 0.0, 0.0, 0.0, [1.0, 0.1, 0.0, 0.0]),
            Err(ModelError::NonUnitQuaternion { .. })
        ));
    }

    #[test]
    fn scheme_rejects_gap_and_nonzero_start() {
        let mk = |lower, upper| PerformanceClass {
            label: "x".into(),
            lower,
            upper,
        };
        assert!(PerformanceClassScheme::new(
            SchemeKind::Application,
            vec![mk(0.0, 0.1), mk(0.2, 0.5)],
            "over"
        )
        .is_err());
        assert!(PerformanceClassScheme::new(
            SchemeKind::Application,
            vec![mk(0.1, 0.5)],
            "over"
        )
        .is_err());
    }

    #[test]
    fn scheme_boundary_semantics() {
        let scheme = PerformanceClassScheme::new(
            SchemeKind::Application,
            vec![
                PerformanceClass {
                    label: "A".into(),
                    lower: 0.0,
                    upper: 0.05,
                },
                PerformanceClass {
                    label: "B".into(),
                    lower: 0.05,
                    upper: 0.1,
                },
            ],
            "unclassified",
        )
        .unwrap();
        assert_eq!(scheme.label_for(0.04), "A");
        assert_eq!(scheme.label_for(0.05), "B");
        assert_eq!(scheme.label_for(0.1), "unclassified");
    }

    #[test]
    fn scenario_metrics_mean() {
        let m = ScenarioMetrics::new("s", vec![0.04, 0.05, 0.06]).unwrap();
        assert!((m.mean_h95 - 0.05).abs() < 1e-12);
    }
}
