//! Mapping scenario metrics to performance classes: fixed application
//! thresholds, or technology-related classes from SSE-optimal 1-D clustering
//! with an elbow criterion for the cluster count.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    ModelError, PerformanceClass, PerformanceClassScheme, ScenarioMetrics, SchemeKind,
};

#[derive(Debug, Error, PartialEq)]
pub enum CategorizeError {
    #[error("invalid cluster count {k} for {n} values")]
    InvalidK { k: usize, n: usize },
    #[error("elbow needs k_max >= 3 and more values than k_max (k_max {k_max}, n {n})")]
    InvalidElbowRange { k_max: usize, n: usize },
    #[error("label count {labels} does not match cluster count {k}")]
    LabelCountMismatch { labels: usize, k: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Summary of one cluster of a 1-D clustering, in increasing center order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub center: f64,
    pub min: f64,
    pub max: f64,
    pub len: usize,
}

/// Result of SSE-optimal 1-D k-means. Clusters are indexed in increasing
/// center order; `assignments[i]` is the cluster of input value `i` in the
/// original input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub k: usize,
    pub clusters: Vec<ClusterSummary>,
    pub assignments: Vec<usize>,
    /// Sum of squared distances of each value to its cluster center.
    pub sse: f64,
}

impl ClusteringResult {
    pub fn centers(&self) -> Vec<f64> {
        self.clusters.iter().map(|c| c.center).collect()
    }
}

/// Labels a scenario with the class containing its mean metric value.
pub fn classify_application(
    metrics: &ScenarioMetrics,
    scheme: &PerformanceClassScheme,
) -> ScenarioMetrics {
    metrics
        .clone()
        .with_label(scheme.label_for(metrics.mean_h95))
}

/// Cost of grouping `window` into one cluster: sum of squared deviations
/// from the mean, accumulated left to right.
fn interval_cost(window: &[f64]) -> f64 {
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    window.iter().map(|v| (v - mean) * (v - mean)).sum()
}

/// Globally SSE-optimal partition of the values into `k` clusters.
///
/// Optimal 1-D clusters are contiguous in sorted order, so dynamic
/// programming over sorted prefixes finds the exact optimum; the result is
/// deterministic (no seeding, no iteration). Quadratic-or-so in the input
/// length, which is ample for scenario-count-sized inputs.
pub fn kmeans_1d_exact(values: &[f64], k: usize) -> Result<ClusteringResult, CategorizeError> {
    let n = values.len();
    if k < 1 || k > n {
        return Err(CategorizeError::InvalidK { k, n });
    }

    // Sort, remembering where each value came from.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .partial_cmp(&values[b])
            .expect("non-finite value")
            .then(a.cmp(&b))
    });
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();

    // cost[i][j]: cost of one cluster over sorted[i..=j]
    let cost = |i: usize, j: usize| interval_cost(&sorted[i..=j]);

    // best[c][j]: minimal cost of clustering sorted[0..=j] into c+1 clusters,
    // with the split position that achieves it.
    let mut best = vec![vec![(f64::INFINITY, usize::MAX); n]; k];
    for (j, slot) in best[0].iter_mut().enumerate() {
        *slot = (cost(0, j), 0);
    }
    for c in 1..k {
        for j in c..n {
            let mut acc = (f64::INFINITY, usize::MAX);
            for split in c..=j {
                let total = best[c - 1][split - 1].0 + cost(split, j);
                if total < acc.0 {
                    acc = (total, split);
                }
            }
            best[c][j] = acc;
        }
    }

    // Backtrack cluster boundaries.
    let mut starts = vec![0usize; k];
    let mut j = n - 1;
    for c in (0..k).rev() {
        starts[c] = best[c][j].1;
        if c > 0 {
            j = starts[c] - 1;
        }
    }

    let mut clusters = Vec::with_capacity(k);
    let mut assignments = vec![0usize; n];
    let mut sse = 0.0;
    for c in 0..k {
        let start = starts[c];
        let end = if c + 1 < k { starts[c + 1] - 1 } else { n - 1 };
        let window = &sorted[start..=end];
        let center = window.iter().sum::<f64>() / window.len() as f64;
        // Recompute the final SSE from the chosen partition so it matches a
        // straightforward per-cluster recomputation bit for bit.
        sse += interval_cost(window);
        clusters.push(ClusterSummary {
            center,
            min: window[0],
            max: window[window.len() - 1],
            len: window.len(),
        });
        for idx in start..=end {
            assignments[order[idx]] = c;
        }
    }

    Ok(ClusteringResult {
        k,
        clusters,
        assignments,
        sse,
    })
}

/// Elbow criterion: picks the k in `[2, k_max - 1]` maximizing the second
/// difference SSE(k-1) - 2 SSE(k) + SSE(k+1), i.e. the sharpest bend of the
/// SSE curve. Ties break toward smaller k.
pub fn elbow_select_k(values: &[f64], k_max: usize) -> Result<usize, CategorizeError> {
    let n = values.len();
    if k_max < 3 || n <= k_max {
        return Err(CategorizeError::InvalidElbowRange { k_max, n });
    }
    let sse: Vec<f64> = (1..=k_max)
        .map(|k| kmeans_1d_exact(values, k).map(|r| r.sse))
        .collect::<Result<_, _>>()?;
    let mut best_k = 2;
    let mut best_curv = f64::NEG_INFINITY;
    for k in 2..=k_max - 1 {
        let curv = sse[k - 2] - 2.0 * sse[k - 1] + sse[k];
        if curv > best_curv {
            best_curv = curv;
            best_k = k;
        }
    }
    Ok(best_k)
}

/// Derives a class scheme from a clustering: class i covers
/// `[boundary_{i-1}, boundary_i)` where boundary_i is the minimum value of
/// cluster i+1. The first lower bound is 0 and the last cluster becomes the
/// overflow label, covering everything at and beyond the final boundary.
pub fn scheme_from_clusters(
    result: &ClusteringResult,
    labels: &[String],
) -> Result<PerformanceClassScheme, CategorizeError> {
    if labels.len() != result.k {
        return Err(CategorizeError::LabelCountMismatch {
            labels: labels.len(),
            k: result.k,
        });
    }
    let mut classes = Vec::with_capacity(result.k.saturating_sub(1));
    let mut lower = 0.0;
    for (label, upper_cluster) in labels.iter().zip(result.clusters.iter().skip(1)) {
        let boundary = upper_cluster.min;
        classes.push(PerformanceClass {
            label: label.clone(),
            lower,
            upper: boundary,
        });
        lower = boundary;
    }
    Ok(PerformanceClassScheme::new(
        SchemeKind::Technology,
        classes,
        labels[result.k - 1].clone(),
    )?)
}

/// Roman numerals I..VIII for technology class labels.
pub fn roman_labels(k: usize) -> Vec<String> {
    const ROMANS: [&str; 12] = [
        "I", "II", "III", "IV", "V", "VI", "VII", "VIII", "IX", "X", "XI", "XII",
    ];
    (0..k)
        .map(|i| {
            ROMANS
                .get(i)
                .map(|s| s.to_string())
                .unwrap_or_else(|| format!("C{}", i + 1))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent oracle: enumerate every partition of the sorted values
    /// into k contiguous runs and take the cheapest. Run costs are computed
    /// naively (mean, then sum of squared deviations) and accumulated left
    /// to right, so a correct implementation must agree bit for bit.
    fn brute_force_sse(values: &[f64], k: usize) -> f64 {
        fn run_cost(window: &[f64]) -> f64 {
            let mean = window.iter().sum::<f64>() / window.len() as f64;
            window.iter().map(|v| (v - mean) * (v - mean)).sum()
        }
        fn enumerate(sorted: &[f64], splits: &mut Vec<usize>, k: usize, best: &mut f64) {
            if splits.len() == k - 1 {
                let mut total = 0.0;
                let mut start = 0;
                for &s in splits.iter() {
                    total += run_cost(&sorted[start..s]);
                    start = s;
                }
                total += run_cost(&sorted[start..]);
                if total < *best {
                    *best = total;
                }
                return;
            }
            let lo = splits.last().map_or(1, |&s| s + 1);
            let remaining = (k - 1) - splits.len();
            for s in lo..=sorted.len() - remaining {
                splits.push(s);
                enumerate(sorted, splits, k, best);
                splits.pop();
            }
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut best = f64::INFINITY;
        enumerate(&sorted, &mut Vec::new(), k, &mut best);
        best
    }

    #[test]
    fn two_group_example() {
        let result = kmeans_1d_exact(&[0.0, 0.1, 5.0, 5.1], 2).unwrap();
        assert_eq!(result.assignments, vec![0, 0, 1, 1]);
        assert!((result.sse - 0.01).abs() < 1e-15);
        assert_eq!(result.sse, brute_force_sse(&[0.0, 0.1, 5.0, 5.1], 2));
    }

    #[test]
    fn k_one_is_mean_and_variance() {
        let values = [1.0, 2.0, 4.0, 7.0];
        let result = kmeans_1d_exact(&values, 1).unwrap();
        assert_eq!(result.clusters[0].center, 3.5);
        let var_n: f64 = values.iter().map(|v| (v - 3.5) * (v - 3.5)).sum();
        assert_eq!(result.sse, var_n);
    }

    #[test]
    fn k_equals_n_zero_sse() {
        let values = [3.0, 1.0, 2.0];
        let result = kmeans_1d_exact(&values, 3).unwrap();
        assert_eq!(result.sse, 0.0);
        // Assignments respect input order with ascending centers.
        assert_eq!(result.assignments, vec![2, 0, 1]);
    }

    #[test]
    fn invalid_k_rejected() {
        assert!(kmeans_1d_exact(&[1.0], 0).is_err());
        assert!(kmeans_1d_exact(&[1.0], 2).is_err());
    }

    #[test]
    fn elbow_three_separated_groups() {
        // Three groups with gaps far above the within-group spread, laid out
        // so no 2-clustering explains the data: SSE collapses at k = 3 and
        // the second difference peaks there.
        let mut values = Vec::new();
        for i in 0..3 {
            values.push(0.0 + i as f64 * 0.005);
        }
        for i in 0..30 {
            values.push(1.0 + i as f64 * 0.001);
        }
        for i in 0..3 {
            values.push(2.0 + i as f64 * 0.005);
        }
        assert_eq!(elbow_select_k(&values, 8).unwrap(), 3);
    }

    #[test]
    fn elbow_equal_groups_bend_at_two() {
        // With three equal, equidistant groups the best 2-clustering already
        // removes three quarters of the dispersion, so the sharpest bend of
        // the SSE curve is at k = 2 under the second-difference criterion.
        let mut values = Vec::new();
        for base in [0.0, 100.0, 200.0] {
            for i in 0..5 {
                values.push(base + i as f64 * 0.01);
            }
        }
        assert_eq!(elbow_select_k(&values, 8).unwrap(), 2);
    }

    #[test]
    fn elbow_linear_decay_ties_to_smallest() {
        // Evenly spaced values: SSE(k) decays smoothly, no sharp bend.
        let values: Vec<f64> = (0..30).map(|i| i as f64).collect();
        assert_eq!(elbow_select_k(&values, 8).unwrap(), 2);
    }

    #[test]
    fn elbow_precondition() {
        assert!(elbow_select_k(&[1.0, 2.0, 3.0], 3).is_err());
        let values: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(elbow_select_k(&values, 2).is_err());
    }

    fn constructed(clusters: Vec<ClusterSummary>) -> ClusteringResult {
        let k = clusters.len();
        ClusteringResult {
            k,
            clusters,
            assignments: Vec::new(),
            sse: 0.0,
        }
    }

    #[test]
    fn scheme_from_two_constructed_clusters() {
        // Boundary rule applied to given clusters {0.03, 0.05} | {0.06, 0.2}:
        // the boundary is the minimum of the upper cluster.
        let result = constructed(vec![
            ClusterSummary {
                center: 0.04,
                min: 0.03,
                max: 0.05,
                len: 2,
            },
            ClusterSummary {
                center: 0.13,
                min: 0.06,
                max: 0.2,
                len: 2,
            },
        ]);
        let scheme =
            scheme_from_clusters(&result, &["I".to_string(), "II".to_string()]).unwrap();
        assert_eq!(scheme.classes().len(), 1);
        assert_eq!(scheme.classes()[0].upper, 0.06);
        assert_eq!(scheme.label_for(0.059), "I");
        assert_eq!(scheme.label_for(0.06), "II");
    }

    #[test]
    fn scheme_from_single_cluster_covers_everything() {
        let result = kmeans_1d_exact(&[0.1, 0.2], 1).unwrap();
        let scheme = scheme_from_clusters(&result, &["only".to_string()]).unwrap();
        assert!(scheme.classes().is_empty());
        assert_eq!(scheme.label_for(0.0), "only");
        assert_eq!(scheme.label_for(99.0), "only");
    }

    #[test]
    fn scheme_reproduces_interval_pattern() {
        // Five clusters whose upper four minima are the class boundaries:
        // I [0, 0.056), II [0.056, 0.209), III [0.209, 0.394),
        // IV [0.394, 0.493), V at and beyond 0.493.
        let mk = |min: f64, max: f64| ClusterSummary {
            center: (min + max) / 2.0,
            min,
            max,
            len: 2,
        };
        let result = constructed(vec![
            mk(0.02, 0.05),
            mk(0.056, 0.2),
            mk(0.209, 0.39),
            mk(0.394, 0.49),
            mk(0.493, 0.6),
        ]);
        let scheme = scheme_from_clusters(&result, &roman_labels(5)).unwrap();
        let uppers: Vec<f64> = scheme.classes().iter().map(|c| c.upper).collect();
        assert_eq!(uppers, vec![0.056, 0.209, 0.394, 0.493]);
        assert_eq!(scheme.label_for(0.4), "IV");
        assert_eq!(scheme.label_for(0.493), "V");
    }

    #[test]
    fn classify_application_sets_label() {
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
        let m = ScenarioMetrics::new("s", vec![0.04]).unwrap();
        assert_eq!(classify_application(&m, &scheme).class_label.unwrap(), "A");
        let m = ScenarioMetrics::new("s", vec![1.2]).unwrap();
        assert_eq!(
            classify_application(&m, &scheme).class_label.unwrap(),
            "unclassified"
        );
    }

    proptest! {
        #[test]
        fn dp_matches_brute_force(
            values in proptest::collection::vec(0.0f64..10.0, 2..12),
            k in 1usize..4,
        ) {
            prop_assume!(k <= values.len());
            let dp = kmeans_1d_exact(&values, k).unwrap();
            prop_assert_eq!(dp.sse, brute_force_sse(&values, k));
        }

        #[test]
        fn sse_non_increasing_in_k(
            values in proptest::collection::vec(0.0f64..10.0, 4..20),
        ) {
            let mut prev = f64::INFINITY;
            for k in 1..=values.len().min(6) {
                let sse = kmeans_1d_exact(&values, k).unwrap().sse;
                prop_assert!(sse <= prev + 1e-12);
                prev = sse;
            }
        }

        #[test]
        fn scheme_always_valid(
            values in proptest::collection::vec(0.0f64..5.0, 3..20),
            k in 1usize..5,
        ) {
            prop_assume!(k <= values.len());
            let result = kmeans_1d_exact(&values, k).unwrap();
            // Distinct minima required for distinct boundaries; skip degenerate draws.
            let mins: Vec<f64> = result.clusters.iter().map(|c| c.min).collect();
            prop_assume!(mins.windows(2).all(|w| w[0] < w[1]));
            prop_assume!(mins[0] > 0.0 || k == 1);
            let scheme = scheme_from_clusters(&result, &roman_labels(k)).unwrap();
            prop_assert_eq!(scheme.classes().len(), k - 1);
        }

        #[test]
        fn sse_exactly_recomputable_from_assignments(
            values in proptest::collection::vec(0.0f64..10.0, 2..25),
            k in 1usize..5,
        ) {
            prop_assume!(k <= values.len());
            let result = kmeans_1d_exact(&values, k).unwrap();
            // Per-cluster recomputation in cluster order, matching the
            // implementation's accumulation order.
            let mut recomputed = 0.0;
            for c in 0..k {
                let mut members: Vec<f64> = values
                    .iter()
                    .zip(&result.assignments)
                    .filter(|&(_, a)| *a == c)
                    .map(|(v, _)| *v)
                    .collect();
                members.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let mean = members.iter().sum::<f64>() / members.len() as f64;
                recomputed += members.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
            }
            prop_assert_eq!(result.sse, recomputed);
        }
    }
}
