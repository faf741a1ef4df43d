//! Pure-leaf binary decision trees over influencing factors: learning,
//! prediction with extrapolation flags, per-leaf factor relevance, and
//! rendering (DOT, text outline, versioned JSON).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{domain_violation, Factor, FactorKind, FactorSchema, FactorValue};

/// Version tag of the JSON tree document.
pub const TREE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum DtreeError {
    #[error("no records to learn from")]
    EmptyInput,
    #[error("record {index} does not conform to the schema: {reason}")]
    SchemaViolation { index: usize, reason: String },
    #[error("feature '{0}' required for routing but not provided")]
    MissingFactor(String),
    #[error("categorical value '{value}' of factor '{factor}' was never observed in training")]
    UnknownCategoricalValue { factor: String, value: String },
    #[error("factor '{factor}' has the wrong value kind")]
    FeatureKindMismatch { factor: String },
    #[error("no leaf with id {0}")]
    UnknownLeaf(usize),
    #[error("factor '{name}' declared with incompatible kinds across schemas")]
    IncompatibleFactor { name: String },
    #[error("schemas declare contradictory factor orders involving '{name}'")]
    OrderConflict { name: String },
    #[error("unsupported tree document version {0}")]
    UnsupportedVersion(u32),
    #[error("malformed tree document: {0}")]
    Malformed(String),
}

/// One training example: a (possibly partial) factor assignment plus its
/// performance-class label. Factors absent from `features` are treated as
/// inapplicable to this record, never as wildcards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecord {
    pub features: BTreeMap<String, FactorValue>,
    pub label: String,
}

/// The test at an internal node. Records branch left when the test holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitTest {
    pub factor: String,
    #[serde(flatten)]
    pub kind: SplitKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitKind {
    /// Left iff the categorical value equals `value`.
    Category { value: String },
    /// Left iff the continuous value is <= `threshold`. Thresholds are
    /// midpoints between consecutive distinct observed values, so they are
    /// always strictly between two observations.
    Threshold { threshold: f64 },
}

impl SplitTest {
    fn route_left(&self, value: &FactorValue) -> Result<bool, DtreeError> {
        match (&self.kind, value) {
            (SplitKind::Category { value: v }, FactorValue::Categorical(x)) => Ok(x == v),
            (SplitKind::Threshold { threshold }, FactorValue::Continuous(x)) => {
                Ok(*x <= *threshold)
            }
            _ => Err(DtreeError::FeatureKindMismatch {
                factor: self.factor.clone(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Split {
        test: SplitTest,
        left: Box<Node>,
        right: Box<Node>,
    },
    Leaf {
        label: String,
        /// Number of training records routed here.
        support: usize,
        /// True when the training data could not be separated and this is a
        /// majority label over mixed records.
        impure: bool,
        /// Factors applicable to every record at this leaf, in schema order.
        in_scope: Vec<String>,
        /// Distinct feature combinations observed at this leaf.
        observed: Vec<BTreeMap<String, FactorValue>>,
    },
}

impl Node {
    pub fn leaf(label: impl Into<String>) -> Node {
        Node::Leaf {
            label: label.into(),
            support: 0,
            impure: false,
            in_scope: Vec::new(),
            observed: Vec::new(),
        }
    }

    pub fn split(factor: impl Into<String>, kind: SplitKind, left: Node, right: Node) -> Node {
        Node::Split {
            test: SplitTest {
                factor: factor.into(),
                kind,
            },
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Leaf { .. })
    }

    fn count(&self, internals: &mut usize, leaves: &mut usize) {
        match self {
            Node::Leaf { .. } => *leaves += 1,
            Node::Split { left, right, .. } => {
                *internals += 1;
                left.count(internals, leaves);
                right.count(internals, leaves);
            }
        }
    }
}

/// Observed training values per factor, kept for extrapolation checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservedValues {
    Categorical { values: BTreeSet<String> },
    Continuous { min: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: Node,
    /// Factor names in schema order; doubles as the split tie-break order
    /// used when the tree was learned.
    pub factor_order: Vec<String>,
    /// Training-observed values per factor (empty for hand-built trees).
    pub observed: BTreeMap<String, ObservedValues>,
}

impl DecisionTree {
    /// Wraps a hand-built tree (e.g. a planted ground truth) without
    /// training metadata.
    pub fn from_root(root: Node, factor_order: Vec<String>) -> Self {
        DecisionTree {
            root,
            factor_order,
            observed: BTreeMap::new(),
        }
    }

    /// (internal node count, leaf count)
    pub fn node_counts(&self) -> (usize, usize) {
        let (mut i, mut l) = (0, 0);
        self.root.count(&mut i, &mut l);
        (i, l)
    }

    /// Leaves in depth-first (left-first) order.
    pub fn leaves(&self) -> Vec<&Node> {
        let mut out = Vec::new();
        fn walk<'a>(node: &'a Node, out: &mut Vec<&'a Node>) {
            match node {
                Node::Leaf { .. } => out.push(node),
                Node::Split { left, right, .. } => {
                    walk(left, out);
                    walk(right, out);
                }
            }
        }
        walk(&self.root, &mut out);
        out
    }
}

/// Prediction outcome: the routed label plus the continuous factors whose
/// provided value lies outside the training-observed range. Extrapolated
/// values deserve caution: the tree has never seen that region.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: String,
    pub extrapolation: Vec<String>,
}

// ---------------------------------------------------------------------------
// Learning
// ---------------------------------------------------------------------------

/// Exact split score: sum over children of (sum of squared label counts /
/// child size). Maximizing it is equivalent to maximizing the Gini impurity
/// decrease; comparing as integer rationals keeps ties exact so the
/// documented tie-break order is the only tie-breaker.
#[derive(Debug, Clone, Copy, PartialEq)]
struct SplitScore {
    num: u128,
    den: u128,
}

impl SplitScore {
    fn new(left: &BTreeMap<&str, u64>, n_left: u64, right: &BTreeMap<&str, u64>, n_right: u64) -> Self {
        let sq = |counts: &BTreeMap<&str, u64>| -> u128 {
            counts.values().map(|&c| (c as u128) * (c as u128)).sum()
        };
        SplitScore {
            num: sq(left) * n_right as u128 + sq(right) * n_left as u128,
            den: n_left as u128 * n_right as u128,
        }
    }

    fn beats(&self, other: &SplitScore) -> bool {
        self.num * other.den > other.num * self.den
    }
}

struct Candidate {
    test: SplitTest,
    score: SplitScore,
}

fn label_counts<'a>(records: &[&'a LabeledRecord]) -> BTreeMap<&'a str, u64> {
    let mut counts = BTreeMap::new();
    for r in records {
        *counts.entry(r.label.as_str()).or_insert(0) += 1;
    }
    counts
}

/// Factors defined for every record in the node, in schema order.
fn in_scope_factors<'a>(schema: &'a FactorSchema, records: &[&LabeledRecord]) -> Vec<&'a Factor> {
    schema
        .factors()
        .iter()
        .filter(|f| records.iter().all(|r| r.features.contains_key(&f.name)))
        .collect()
}

fn best_candidate(schema: &FactorSchema, records: &[&LabeledRecord]) -> Option<Candidate> {
    let mut best: Option<Candidate> = None;
    for factor in in_scope_factors(schema, records) {
        let tests: Vec<SplitKind> = match &factor.kind {
            FactorKind::Categorical { .. } => {
                let mut values: BTreeSet<&str> = BTreeSet::new();
                for r in records {
                    if let Some(FactorValue::Categorical(v)) = r.features.get(&factor.name) {
                        values.insert(v);
                    }
                }
                if values.len() < 2 {
                    continue;
                }
                values
                    .into_iter()
                    .map(|v| SplitKind::Category { value: v.to_string() })
                    .collect()
            }
            FactorKind::Continuous { .. } => {
                let mut values: Vec<f64> = records
                    .iter()
                    .filter_map(|r| r.features.get(&factor.name).and_then(FactorValue::as_number))
                    .collect();
                values.sort_by(|a, b| a.partial_cmp(b).expect("non-finite factor value"));
                values.dedup();
                values
                    .windows(2)
                    .map(|w| SplitKind::Threshold {
                        threshold: (w[0] + w[1]) / 2.0,
                    })
                    .collect()
            }
        };
        for kind in tests {
            let test = SplitTest {
                factor: factor.name.clone(),
                kind,
            };
            let (mut left, mut right) = (Vec::new(), Vec::new());
            for r in records {
                // in-scope factors are present on every record here
                let goes_left = test.route_left(&r.features[&test.factor]).expect("kind checked");
                if goes_left {
                    left.push(*r);
                } else {
                    right.push(*r);
                }
            }
            if left.is_empty() || right.is_empty() {
                continue;
            }
            let score = SplitScore::new(
                &label_counts(&left),
                left.len() as u64,
                &label_counts(&right),
                right.len() as u64,
            );
            if best.as_ref().is_none_or(|b| score.beats(&b.score)) {
                best = Some(Candidate { test, score });
            }
        }
    }
    best
}

fn make_leaf(schema: &FactorSchema, records: &[&LabeledRecord], impure: bool) -> Node {
    let counts = label_counts(records);
    let max = counts.values().copied().max().unwrap_or(0);
    // BTreeMap iterates labels in order, so ties resolve to the smallest label.
    let label = counts
        .iter()
        .find(|(_, &c)| c == max)
        .map(|(l, _)| l.to_string())
        .unwrap_or_default();
    let mut observed: Vec<BTreeMap<String, FactorValue>> = Vec::new();
    for r in records {
        if !observed.contains(&r.features) {
            observed.push(r.features.clone());
        }
    }
    Node::Leaf {
        label,
        support: records.len(),
        impure,
        in_scope: in_scope_factors(schema, records)
            .iter()
            .map(|f| f.name.clone())
            .collect(),
        observed,
    }
}

fn grow(schema: &FactorSchema, records: &[&LabeledRecord]) -> Node {
    let counts = label_counts(records);
    if counts.len() == 1 {
        return make_leaf(schema, records, false);
    }
    match best_candidate(schema, records) {
        None => make_leaf(schema, records, true),
        Some(candidate) => {
            let (mut left, mut right) = (Vec::new(), Vec::new());
            for r in records {
                if candidate.test.route_left(&r.features[&candidate.test.factor]).unwrap() {
                    left.push(*r);
                } else {
                    right.push(*r);
                }
            }
            Node::Split {
                test: candidate.test,
                left: Box::new(grow(schema, &left)),
                right: Box::new(grow(schema, &right)),
            }
        }
    }
}

/// Learns a deterministic binary tree by recursive splitting. Splits are
/// chosen by maximum Gini impurity decrease; candidate thresholds are
/// midpoints between consecutive distinct observed values; recursion stops
/// at pure nodes. A mixed node that no candidate can separate becomes a
/// majority leaf flagged impure.
///
/// Only factors defined for all records at a node are considered there, so
/// system-specific factors appear only under the branch that fixes that
/// system. Ties resolve by schema factor order, then smaller threshold or
/// lexicographically smaller category value.
pub fn learn_tree(
    records: &[LabeledRecord],
    schema: &FactorSchema,
) -> Result<DecisionTree, DtreeError> {
    if records.is_empty() {
        return Err(DtreeError::EmptyInput);
    }
    for (index, r) in records.iter().enumerate() {
        for (name, value) in &r.features {
            let factor = schema.factor(name).ok_or_else(|| DtreeError::SchemaViolation {
                index,
                reason: format!("unknown factor '{name}'"),
            })?;
            if let Some(reason) = domain_violation(factor, value) {
                return Err(DtreeError::SchemaViolation {
                    index,
                    reason: format!("factor '{name}': {reason}"),
                });
            }
        }
        if r.label.is_empty() {
            return Err(DtreeError::SchemaViolation {
                index,
                reason: "empty label".into(),
            });
        }
    }

    let mut observed: BTreeMap<String, ObservedValues> = BTreeMap::new();
    for r in records {
        for (name, value) in &r.features {
            match (value, observed.get_mut(name)) {
                (FactorValue::Categorical(v), Some(ObservedValues::Categorical { values })) => {
                    values.insert(v.clone());
                }
                (FactorValue::Categorical(v), None) => {
                    observed.insert(
                        name.clone(),
                        ObservedValues::Categorical {
                            values: BTreeSet::from([v.clone()]),
                        },
                    );
                }
                (FactorValue::Continuous(v), Some(ObservedValues::Continuous { min, max })) => {
                    *min = min.min(*v);
                    *max = max.max(*v);
                }
                (FactorValue::Continuous(v), None) => {
                    observed.insert(name.clone(), ObservedValues::Continuous { min: *v, max: *v });
                }
                _ => {
                    return Err(DtreeError::IncompatibleFactor { name: name.clone() });
                }
            }
        }
    }

    let refs: Vec<&LabeledRecord> = records.iter().collect();
    Ok(DecisionTree {
        root: grow(schema, &refs),
        factor_order: schema.factors().iter().map(|f| f.name.clone()).collect(),
        observed,
    })
}

// ---------------------------------------------------------------------------
// Prediction and relevance
// ---------------------------------------------------------------------------

/// Routes a feature assignment to a leaf label and flags continuous factors
/// whose value lies outside the training-observed range.
pub fn predict(
    tree: &DecisionTree,
    features: &BTreeMap<String, FactorValue>,
) -> Result<Prediction, DtreeError> {
    let mut extrapolation = Vec::new();
    for (name, value) in features {
        match (value, tree.observed.get(name)) {
            (FactorValue::Categorical(v), Some(ObservedValues::Categorical { values })) => {
                if !values.contains(v) {
                    return Err(DtreeError::UnknownCategoricalValue {
                        factor: name.clone(),
                        value: v.clone(),
                    });
                }
            }
            (FactorValue::Continuous(v), Some(ObservedValues::Continuous { min, max }))
                if (*v < *min || *v > *max) => {
                    extrapolation.push(name.clone());
                }
            _ => {}
        }
    }

    let mut node = &tree.root;
    loop {
        match node {
            Node::Leaf { label, .. } => {
                return Ok(Prediction {
                    label: label.clone(),
                    extrapolation,
                });
            }
            Node::Split { test, left, right } => {
                let value = features
                    .get(&test.factor)
                    .ok_or_else(|| DtreeError::MissingFactor(test.factor.clone()))?;
                node = if test.route_left(value)? { left } else { right };
            }
        }
    }
}

/// Factor relevance for one leaf: factors tested on the root-to-leaf path
/// (in path order) are relevant; in-scope factors absent from the path are
/// irrelevant for the class the leaf represents.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeafRelevance {
    pub leaf_id: usize,
    pub label: String,
    pub support: usize,
    pub impure: bool,
    pub relevant: Vec<String>,
    pub irrelevant: Vec<String>,
}

/// Relevance report over all leaves, ids in depth-first (left-first) order.
pub fn relevance(tree: &DecisionTree) -> Vec<LeafRelevance> {
    let mut out = Vec::new();
    fn walk(node: &Node, path: &mut Vec<String>, order: &[String], out: &mut Vec<LeafRelevance>) {
        match node {
            Node::Leaf {
                label,
                support,
                impure,
                in_scope,
                ..
            } => {
                let mut relevant: Vec<String> = Vec::new();
                for f in path.iter() {
                    if !relevant.contains(f) {
                        relevant.push(f.clone());
                    }
                }
                // Fall back to the tree's factor order for hand-built trees
                // that carry no per-leaf scope.
                let scope: Vec<String> = if in_scope.is_empty() {
                    order.to_vec()
                } else {
                    in_scope.clone()
                };
                let irrelevant = scope
                    .iter()
                    .filter(|f| !relevant.contains(f))
                    .cloned()
                    .collect();
                out.push(LeafRelevance {
                    leaf_id: out.len(),
                    label: label.clone(),
                    support: *support,
                    impure: *impure,
                    relevant,
                    irrelevant,
                });
            }
            Node::Split { test, left, right } => {
                path.push(test.factor.clone());
                walk(left, path, order, out);
                walk(right, path, order, out);
                path.pop();
            }
        }
    }
    walk(&tree.root, &mut Vec::new(), &tree.factor_order, &mut out);
    out
}

/// Relevance for a single leaf id.
pub fn relevance_for_leaf(tree: &DecisionTree, leaf_id: usize) -> Result<LeafRelevance, DtreeError> {
    relevance(tree)
        .into_iter()
        .nth(leaf_id)
        .ok_or(DtreeError::UnknownLeaf(leaf_id))
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderFormat {
    Dot,
    Text,
    Json,
}

#[derive(Serialize, Deserialize)]
struct TreeDocument {
    version: u32,
    factor_order: Vec<String>,
    observed: BTreeMap<String, ObservedValues>,
    root: Node,
}

/// Renders the tree. The JSON form round-trips losslessly through
/// [`load_tree`]; DOT is Graphviz-compatible; text is an indented outline.
pub fn render(tree: &DecisionTree, format: RenderFormat) -> String {
    match format {
        RenderFormat::Json => {
            let doc = TreeDocument {
                version: TREE_FORMAT_VERSION,
                factor_order: tree.factor_order.clone(),
                observed: tree.observed.clone(),
                root: tree.root.clone(),
            };
            let mut out = serde_json::to_string_pretty(&doc).expect("tree serializes");
            out.push('\n');
            out
        }
        RenderFormat::Dot => render_dot(tree),
        RenderFormat::Text => render_text(tree),
    }
}

/// Parses a JSON tree document produced by [`render`].
pub fn load_tree(json: &str) -> Result<DecisionTree, DtreeError> {
    let doc: TreeDocument =
        serde_json::from_str(json).map_err(|e| DtreeError::Malformed(e.to_string()))?;
    if doc.version != TREE_FORMAT_VERSION {
        return Err(DtreeError::UnsupportedVersion(doc.version));
    }
    Ok(DecisionTree {
        root: doc.root,
        factor_order: doc.factor_order,
        observed: doc.observed,
    })
}

fn edge_labels(test: &SplitTest) -> (String, String) {
    match &test.kind {
        SplitKind::Category { value } => (format!("= {value}"), format!("≠ {value}")),
        SplitKind::Threshold { threshold } => (format!("≤ {threshold}"), format!("> {threshold}")),
    }
}

fn render_dot(tree: &DecisionTree) -> String {
    let mut out = String::from("digraph decision_tree {\n");
    out.push_str("  node [shape=box, fontname=\"Helvetica\"];\n");
    fn walk(node: &Node, next_id: &mut usize, out: &mut String) -> usize {
        let id = *next_id;
        *next_id += 1;
        match node {
            Node::Leaf {
                label,
                support,
                impure,
                ..
            } => {
                let marker = if *impure { ", impure" } else { "" };
                out.push_str(&format!(
                    "  n{id} [label=\"{label}\\n(n={support}{marker})\", shape=ellipse, style=filled, fillcolor=lightgrey];\n"
                ));
            }
            Node::Split { test, left, right } => {
                out.push_str(&format!("  n{id} [label=\"{}\"];\n", test.factor));
                let (l, r) = edge_labels(test);
                let left_id = walk(left, next_id, out);
                out.push_str(&format!("  n{id} -> n{left_id} [label=\"{l}\"];\n"));
                let right_id = walk(right, next_id, out);
                out.push_str(&format!("  n{id} -> n{right_id} [label=\"{r}\"];\n"));
            }
        }
        id
    }
    let mut next = 0;
    walk(&tree.root, &mut next, &mut out);
    out.push_str("}\n");
    out
}

fn render_text(tree: &DecisionTree) -> String {
    let mut out = String::new();
    fn leaf_line(label: &str, support: usize, impure: bool) -> String {
        if impure {
            format!("{label} (n={support}, impure)")
        } else {
            format!("{label} (n={support})")
        }
    }
    fn walk(node: &Node, indent: usize, out: &mut String) {
        let pad = "  ".repeat(indent);
        match node {
            Node::Leaf {
                label,
                support,
                impure,
                ..
            } => {
                out.push_str(&format!("{pad}{}\n", leaf_line(label, *support, *impure)));
            }
            Node::Split { test, left, right } => {
                let (l, r) = edge_labels(test);
                out.push_str(&format!("{pad}{} {}?\n", test.factor, l));
                out.push_str(&format!("{pad}yes:\n"));
                walk(left, indent + 1, out);
                out.push_str(&format!("{pad}no ({} {}):\n", test.factor, r));
                walk(right, indent + 1, out);
            }
        }
    }
    walk(&tree.root, 0, &mut out);
    out
}

// ---------------------------------------------------------------------------
// Schema joining
// ---------------------------------------------------------------------------

/// Merges per-dataset schemas into one joint schema whose factor order
/// respects every input schema's declared order (that order is the split
/// tie-break priority, so no dataset's priorities may be scrambled).
/// Same-name factors must agree in kind; categorical value lists are
/// unioned, continuous bounds enveloped.
pub fn join_schemas(schemas: &[&FactorSchema]) -> Result<FactorSchema, DtreeError> {
    // Merge factor declarations.
    let mut merged: BTreeMap<String, Factor> = BTreeMap::new();
    for schema in schemas {
        for f in schema.factors() {
            match merged.get_mut(&f.name) {
                None => {
                    merged.insert(f.name.clone(), f.clone());
                }
                Some(existing) => match (&mut existing.kind, &f.kind) {
                    (
                        FactorKind::Categorical { values },
                        FactorKind::Categorical { values: more },
                    ) => {
                        for v in more {
                            if !values.contains(v) {
                                values.push(v.clone());
                            }
                        }
                    }
                    (
                        FactorKind::Continuous { unit, min, max },
                        FactorKind::Continuous {
                            unit: u2,
                            min: mn2,
                            max: mx2,
                        },
                    ) => {
                        if unit != u2 {
                            return Err(DtreeError::IncompatibleFactor {
                                name: f.name.clone(),
                            });
                        }
                        *min = min.min(*mn2);
                        *max = max.max(*mx2);
                    }
                    _ => {
                        return Err(DtreeError::IncompatibleFactor {
                            name: f.name.clone(),
                        });
                    }
                },
            }
        }
    }

    // Topological order over the union of each schema's precedence edges,
    // picking ready factors by (schema index, declared position).
    let mut order: Vec<String> = Vec::new();
    let mut placed: BTreeSet<String> = BTreeSet::new();
    let total = merged.len();
    while order.len() < total {
        let mut next: Option<String> = None;
        'outer: for schema in schemas {
            for f in schema.factors() {
                if placed.contains(&f.name) {
                    continue;
                }
                // Ready iff in every schema declaring it, all factors
                // declared before it are already placed.
                let ready = schemas.iter().all(|s| {
                    if s.factor(&f.name).is_none() {
                        return true;
                    }
                    s.factors()
                        .iter()
                        .take_while(|g| g.name != f.name)
                        .all(|g| placed.contains(&g.name))
                });
                if ready {
                    next = Some(f.name.clone());
                    break 'outer;
                }
            }
        }
        match next {
            Some(name) => {
                placed.insert(name.clone());
                order.push(name);
            }
            None => {
                let stuck = merged
                    .keys()
                    .find(|k| !placed.contains(*k))
                    .cloned()
                    .unwrap_or_default();
                return Err(DtreeError::OrderConflict { name: stuck });
            }
        }
    }

    let factors = order
        .into_iter()
        .map(|name| merged[&name].clone())
        .collect();
    FactorSchema::new(factors).map_err(|e| DtreeError::Malformed(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Factor;

    fn categorical(name: &str, values: &[&str]) -> Factor {
        Factor {
            name: name.into(),
            kind: FactorKind::Categorical {
                values: values.iter().map(|v| v.to_string()).collect(),
            },
        }
    }

    fn continuous(name: &str, min: f64, max: f64) -> Factor {
        Factor {
            name: name.into(),
            kind: FactorKind::Continuous {
                unit: String::new(),
                min,
                max,
            },
        }
    }

    fn record(pairs: &[(&str, FactorValue)], label: &str) -> LabeledRecord {
        LabeledRecord {
            features: pairs
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
            label: label.into(),
        }
    }

    fn cat(v: &str) -> FactorValue {
        FactorValue::Categorical(v.into())
    }

    fn num(v: f64) -> FactorValue {
        FactorValue::Continuous(v)
    }

    #[test]
    fn single_class_single_leaf() {
        let schema = FactorSchema::new(vec![categorical("A", &["x", "y"])]).unwrap();
        let records = vec![
            record(&[("A", cat("x"))], "good"),
            record(&[("A", cat("y"))], "good"),
        ];
        let tree = learn_tree(&records, &schema).unwrap();
        assert!(tree.root.is_leaf());
        assert_eq!(tree.node_counts(), (0, 1));
    }

    #[test]
    fn xor_needs_depth_two() {
        let schema = FactorSchema::new(vec![
            categorical("A", &["0", "1"]),
            categorical("B", &["0", "1"]),
        ])
        .unwrap();
        let records = vec![
            record(&[("A", cat("0")), ("B", cat("0"))], "same"),
            record(&[("A", cat("0")), ("B", cat("1"))], "diff"),
            record(&[("A", cat("1")), ("B", cat("0"))], "diff"),
            record(&[("A", cat("1")), ("B", cat("1"))], "same"),
        ];
        // Brute-force check that no depth-1 tree is pure: any single test
        // leaves a mixed side.
        for test_factor in ["A", "B"] {
            for value in ["0", "1"] {
                let (l, r): (Vec<_>, Vec<_>) = records
                    .iter()
                    .partition(|rec| rec.features[test_factor] == cat(value));
                let pure = |side: &[&LabeledRecord]| {
                    side.iter().map(|r| &r.label).collect::<BTreeSet<_>>().len() <= 1
                };
                assert!(!(pure(&l.to_vec())
                    && pure(&r.to_vec())));
            }
        }
        let tree = learn_tree(&records, &schema).unwrap();
        let (internals, leaves) = tree.node_counts();
        assert_eq!(internals, 3); // root plus one per branch
        assert_eq!(leaves, 4);
        for rec in &records {
            assert_eq!(predict(&tree, &rec.features).unwrap().label, rec.label);
        }
    }

    #[test]
    fn inconsistent_records_yield_impure_majority_leaf() {
        let schema = FactorSchema::new(vec![categorical("A", &["x"])]).unwrap();
        let records = vec![
            record(&[("A", cat("x"))], "p"),
            record(&[("A", cat("x"))], "q"),
            record(&[("A", cat("x"))], "q"),
        ];
        let tree = learn_tree(&records, &schema).unwrap();
        match &tree.root {
            Node::Leaf { label, impure, support, .. } => {
                assert_eq!(label, "q");
                assert!(*impure);
                assert_eq!(*support, 3);
            }
            _ => panic!("expected leaf"),
        }
    }

    #[test]
    fn threshold_is_midpoint_and_interior() {
        let schema = FactorSchema::new(vec![continuous("F", 0.0, 10.0)]).unwrap();
        let records = vec![
            record(&[("F", num(2.0))], "low"),
            record(&[("F", num(4.0))], "high"),
        ];
        let tree = learn_tree(&records, &schema).unwrap();
        match &tree.root {
            Node::Split { test, .. } => match test.kind {
                SplitKind::Threshold { threshold } => assert_eq!(threshold, 3.0),
                _ => panic!("expected threshold"),
            },
            _ => panic!("expected split"),
        }
    }

    #[test]
    fn training_set_consistency() {
        let schema = FactorSchema::new(vec![
            categorical("Sys", &["u", "l"]),
            continuous("Q", 0.0, 1.0),
        ])
        .unwrap();
        let records = vec![
            record(&[("Sys", cat("u")), ("Q", num(0.1))], "C"),
            record(&[("Sys", cat("u")), ("Q", num(0.9))], "B"),
            record(&[("Sys", cat("l")), ("Q", num(0.1))], "B"),
            record(&[("Sys", cat("l")), ("Q", num(0.9))], "A"),
        ];
        let tree = learn_tree(&records, &schema).unwrap();
        for rec in &records {
            assert_eq!(predict(&tree, &rec.features).unwrap().label, rec.label);
        }
    }

    #[test]
    fn determinism_identical_trees() {
        let schema = FactorSchema::new(vec![
            categorical("A", &["x", "y"]),
            continuous("F", 0.0, 100.0),
        ])
        .unwrap();
        let records: Vec<LabeledRecord> = (0..20)
            .map(|i| {
                record(
                    &[
                        ("A", cat(if i % 2 == 0 { "x" } else { "y" })),
                        ("F", num((i * 7 % 13) as f64)),
                    ],
                    if (i * 7 % 13) < 6 { "lo" } else { "hi" },
                )
            })
            .collect();
        let t1 = learn_tree(&records, &schema).unwrap();
        let t2 = learn_tree(&records, &schema).unwrap();
        assert_eq!(render(&t1, RenderFormat::Json), render(&t2, RenderFormat::Json));
    }

    #[test]
    fn order_preserving_relabel_keeps_structure() {
        let schema = FactorSchema::new(vec![
            categorical("A", &["x", "y"]),
            continuous("F", 0.0, 100.0),
        ])
        .unwrap();
        let records: Vec<LabeledRecord> = (0..16)
            .map(|i| {
                record(
                    &[
                        ("A", cat(if i % 4 == 0 { "x" } else { "y" })),
                        ("F", num((i * 5 % 11) as f64)),
                    ],
                    if (i * 5 % 11) < 5 { "a-low" } else { "b-high" },
                )
            })
            .collect();
        let renamed: Vec<LabeledRecord> = records
            .iter()
            .map(|r| LabeledRecord {
                features: r.features.clone(),
                label: format!("class-{}", r.label),
            })
            .collect();
        let t1 = learn_tree(&records, &schema).unwrap();
        let t2 = learn_tree(&renamed, &schema).unwrap();
        fn structure(node: &Node) -> String {
            match node {
                Node::Leaf { .. } => "L".into(),
                Node::Split { test, left, right } => format!(
                    "({} {:?} {} {})",
                    test.factor,
                    test.kind,
                    structure(left),
                    structure(right)
                ),
            }
        }
        assert_eq!(structure(&t1.root), structure(&t2.root));
    }

    #[test]
    fn predict_flags_extrapolation() {
        let schema = FactorSchema::new(vec![continuous("FoV", 0.0, 360.0)]).unwrap();
        let records = vec![
            record(&[("FoV", num(180.0))], "B"),
            record(&[("FoV", num(270.0))], "A"),
        ];
        let tree = learn_tree(&records, &schema).unwrap();
        let p = predict(&tree, &BTreeMap::from([("FoV".to_string(), num(5.0))])).unwrap();
        assert_eq!(p.extrapolation, vec!["FoV".to_string()]);
        assert_eq!(p.label, "B");
    }

    #[test]
    fn predict_rejects_unseen_categorical() {
        let schema = FactorSchema::new(vec![categorical("Env", &["empty", "aisle", "lab"])]).unwrap();
        let records = vec![
            record(&[("Env", cat("empty"))], "C"),
            record(&[("Env", cat("aisle"))], "D"),
        ];
        let tree = learn_tree(&records, &schema).unwrap();
        assert!(matches!(
            predict(&tree, &BTreeMap::from([("Env".to_string(), cat("lab"))])),
            Err(DtreeError::UnknownCategoricalValue { .. })
        ));
    }

    #[test]
    fn relevance_single_leaf_all_irrelevant() {
        let schema = FactorSchema::new(vec![
            categorical("A", &["x"]),
            categorical("B", &["y"]),
        ])
        .unwrap();
        let records = vec![record(&[("A", cat("x")), ("B", cat("y"))], "only")];
        let tree = learn_tree(&records, &schema).unwrap();
        let rel = relevance(&tree);
        assert_eq!(rel.len(), 1);
        assert!(rel[0].relevant.is_empty());
        assert_eq!(rel[0].irrelevant, vec!["A".to_string(), "B".to_string()]);
    }

    #[test]
    fn json_roundtrip_is_byte_identical() {
        let schema = FactorSchema::new(vec![
            categorical("A", &["x", "y"]),
            continuous("F", 0.0, 10.0),
        ])
        .unwrap();
        let records = vec![
            record(&[("A", cat("x")), ("F", num(1.0))], "p"),
            record(&[("A", cat("y")), ("F", num(2.0))], "q"),
        ];
        let tree = learn_tree(&records, &schema).unwrap();
        let json = render(&tree, RenderFormat::Json);
        let reloaded = load_tree(&json).unwrap();
        assert_eq!(render(&reloaded, RenderFormat::Json), json);
        assert_eq!(reloaded, tree);
    }

    #[test]
    fn load_tree_rejects_unknown_version() {
        let json = r#"{"version": 99, "factor_order": [], "observed": {}, "root": {"type": "leaf", "label": "x", "support": 0, "impure": false, "in_scope": [], "observed": []}}"#;
        assert!(matches!(
            load_tree(json),
            Err(DtreeError::UnsupportedVersion(99))
        ));
    }

    #[test]
    fn dot_single_leaf() {
        let tree = DecisionTree::from_root(Node::leaf("A"), vec![]);
        let dot = render(&tree, RenderFormat::Dot);
        assert!(dot.starts_with("digraph"));
        assert_eq!(dot.matches("n0").count(), 1);
    }

    #[test]
    fn join_schemas_respects_declared_orders() {
        let uwb = FactorSchema::new(vec![
            categorical("ILS", &["UWB"]),
            categorical("Environment", &["empty", "aisle"]),
            categorical("EKF", &["on", "off"]),
            categorical("Dynamics", &["yes", "no"]),
        ])
        .unwrap();
        let lidar = FactorSchema::new(vec![
            categorical("ILS", &["LiDAR"]),
            continuous("MapQuality", 0.0, 1.0),
            continuous("FoV", 0.0, 360.0),
            categorical("Reflector", &["on", "off"]),
            categorical("Dynamics", &["yes", "no"]),
        ])
        .unwrap();
        let joint = join_schemas(&[&uwb, &lidar]).unwrap();
        let names: Vec<&str> = joint.factors().iter().map(|f| f.name.as_str()).collect();
        assert_eq!(
            names,
            vec!["ILS", "Environment", "EKF", "MapQuality", "FoV", "Reflector", "Dynamics"]
        );
        match &joint.factor("ILS").unwrap().kind {
            FactorKind::Categorical { values } => {
                assert_eq!(values, &vec!["UWB".to_string(), "LiDAR".to_string()]);
            }
            _ => panic!("expected categorical"),
        }
    }

    #[test]
    fn join_schemas_rejects_kind_conflict() {
        let a = FactorSchema::new(vec![categorical("X", &["1"])]).unwrap();
        let b = FactorSchema::new(vec![continuous("X", 0.0, 1.0)]).unwrap();
        assert!(matches!(
            join_schemas(&[&a, &b]),
            Err(DtreeError::IncompatibleFactor { .. })
        ));
    }
}
