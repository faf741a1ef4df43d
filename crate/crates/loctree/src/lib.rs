//! Batch accuracy analysis for indoor localization experiment logs.
//!
//! The pipeline has three stages, each usable on its own:
//!
//! 1. **Test and evaluation** — parse trajectory logs, align coordinate
//!    frames, synchronize estimate and reference at the evaluation poses,
//!    and compute horizontal-error percentile metrics per experiment and
//!    per scenario ([`ingest`], [`align`], [`metrics`]).
//! 2. **Output categorization** — map each scenario's metric to a
//!    performance class, from fixed application thresholds or from
//!    SSE-optimal 1-D clustering with an elbow-selected cluster count
//!    ([`categorize`]).
//! 3. **Decision tree learning** — learn a deterministic, pure-leaf binary
//!    tree over the influencing factors, predict, read off per-leaf factor
//!    relevance, and render DOT/text/JSON ([`dtree`]).
//!
//! [`synth`] generates synthetic campaigns with planted ground truth (the
//! dog-food path for the whole pipeline), and [`pipeline`] wires the stages
//! into the file-based commands exposed by the `loctree` binary.
//!
//! See the crate's `examples/` directory for one runnable example per
//! capability; `cargo run --example full_pipeline` walks the whole chain.

pub mod align;
pub mod categorize;
pub mod dtree;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod synth;

pub use align::{icp_fitness, umeyama_align, MapQualityScore, PointCloud2D, SimilarityTransform};
pub use categorize::{classify_application, elbow_select_k, kmeans_1d_exact, scheme_from_clusters};
pub use dtree::{learn_tree, load_tree, predict, relevance, render, DecisionTree, LabeledRecord};
pub use ingest::{interpolate_at, parse_scenario_manifest, parse_trajectory_csv, sync_pairs};
pub use metrics::{aggregate_scenario, cdf, horizontal_errors, percentile, repeatability};
pub use model::{
    validate_manifest, FactorSchema, FactorValue, PerformanceClassScheme, Pose, Scenario,
    ScenarioMetrics, SchemeKind, Trajectory,
};
