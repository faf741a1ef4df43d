//! Error samples, percentile metrics, empirical CDFs, per-scenario
//! aggregation, and a repeatability diagnostic over repetition CDFs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::SyncedSamplePair;
use crate::model::{ModelError, ScenarioMetrics};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("empty input")]
    EmptyInput,
    #[error("percentile fraction {0} outside [0, 1]")]
    InvalidFraction(f64),
    #[error("repeatability needs at least 2 curves, got {0}")]
    TooFewCurves(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Horizontal position error at one evaluation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSample {
    pub t: f64,
    pub horizontal_error: f64,
}

/// Empirical CDF as a step function: fraction of samples <= error at each
/// distinct error value, ending at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfCurve {
    points: Vec<(f64, f64)>,
}

impl CdfCurve {
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Fraction of samples <= `x` (right-continuous step function).
    pub fn fraction_at(&self, x: f64) -> f64 {
        let mut frac = 0.0;
        for &(err, f) in &self.points {
            if err <= x {
                frac = f;
            } else {
                break;
            }
        }
        frac
    }

    /// Smallest error value whose cumulative fraction reaches `q`.
    pub fn quantile(&self, q: f64) -> f64 {
        for &(err, f) in &self.points {
            if f >= q {
                return err;
            }
        }
        self.points[self.points.len() - 1].0
    }
}

/// Planar Euclidean distances between estimate and reference; z is ignored
/// by definition of the horizontal metric.
pub fn horizontal_errors(pairs: &[SyncedSamplePair]) -> Vec<ErrorSample> {
    pairs
        .iter()
        .map(|p| {
            let dx = p.estimate_xy.0 - p.reference_xy.0;
            let dy = p.estimate_xy.1 - p.reference_xy.1;
            ErrorSample {
                t: p.t,
                horizontal_error: dx.hypot(dy),
            }
        })
        .collect()
}

/// Percentile by linear interpolation between closest ranks:
/// rank = q * (n - 1) zero-based over the sorted values.
pub fn percentile(values: &[f64], q: f64) -> Result<f64, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(MetricsError::InvalidFraction(q));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite metric value"));
    let rank = q * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    if frac == 0.0 || lo + 1 == sorted.len() {
        Ok(sorted[lo])
    } else {
        Ok(sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]))
    }
}

/// Empirical CDF with duplicate values collapsed to their last (highest)
/// cumulative fraction.
pub fn cdf(values: &[f64]) -> Result<CdfCurve, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite metric value"));
    let n = sorted.len() as f64;
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (k, v) in sorted.iter().enumerate() {
        let frac = (k + 1) as f64 / n;
        match points.last_mut() {
            Some(last) if last.0 == *v => last.1 = frac,
            _ => points.push((*v, frac)),
        }
    }
    Ok(CdfCurve { points })
}

/// Metrics of a single experiment (one repetition of one scenario).
///
/// `h95` holds the configured driving percentile (0.95 unless overridden);
/// `median` and `mean` are always reported alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentMetrics {
    pub scenario_id: String,
    pub repetition: u32,
    pub n_samples: usize,
    pub h95: f64,
    pub median: f64,
    pub mean: f64,
}

impl ExperimentMetrics {
    /// Computes the per-experiment metrics from error samples. `q` is the
    /// driving percentile fraction.
    pub fn from_errors(
        scenario_id: impl Into<String>,
        repetition: u32,
        errors: &[ErrorSample],
        q: f64,
    ) -> Result<Self, MetricsError> {
        let values: Vec<f64> = errors.iter().map(|e| e.horizontal_error).collect();
        if values.is_empty() {
            return Err(MetricsError::EmptyInput);
        }
        Ok(ExperimentMetrics {
            scenario_id: scenario_id.into(),
            repetition,
            n_samples: values.len(),
            h95: percentile(&values, q)?,
            median: percentile(&values, 0.5)?,
            mean: values.iter().sum::<f64>() / values.len() as f64,
        })
    }
}

/// Raised (as a warning, not an error) when a scenario has fewer repetitions
/// than the manifest declares.
#[derive(Debug, Clone, PartialEq)]
pub struct RepetitionShortfall {
    pub scenario_id: String,
    pub declared: usize,
    pub actual: usize,
}

/// Aggregates all repetitions of one scenario into its mean driving metric.
/// Returns the aggregate together with an optional shortfall warning when
/// fewer repetitions than declared are present.
pub fn aggregate_scenario(
    experiments: &[ExperimentMetrics],
    declared_repetitions: usize,
) -> Result<(ScenarioMetrics, Option<RepetitionShortfall>), MetricsError> {
    let first = experiments.first().ok_or(MetricsError::EmptyInput)?;
    let per_rep: Vec<f64> = experiments.iter().map(|e| e.h95).collect();
    let metrics = ScenarioMetrics::new(first.scenario_id.clone(), per_rep)?;
    let shortfall = (experiments.len() < declared_repetitions).then(|| RepetitionShortfall {
        scenario_id: first.scenario_id.clone(),
        declared: declared_repetitions,
        actual: experiments.len(),
    });
    Ok((metrics, shortfall))
}

/// Maximum pairwise Kolmogorov-Smirnov supremum distance between the step
/// functions; 0 means the repetitions produced identical error distributions.
pub fn repeatability(curves: &[CdfCurve]) -> Result<f64, MetricsError> {
    if curves.len() < 2 {
        return Err(MetricsError::TooFewCurves(curves.len()));
    }
    let mut max_dist: f64 = 0.0;
    for i in 0..curves.len() {
        for j in i + 1..curves.len() {
            max_dist = max_dist.max(ks_distance(&curves[i], &curves[j]));
        }
    }
    Ok(max_dist)
}

fn ks_distance(a: &CdfCurve, b: &CdfCurve) -> f64 {
    // Evaluate both step functions at every breakpoint of either curve.
    let mut dist: f64 = 0.0;
    for &(x, _) in a.points.iter().chain(b.points.iter()) {
        dist = dist.max((a.fraction_at(x) - b.fraction_at(x)).abs());
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair(t: f64, est: (f64, f64), refr: (f64, f64)) -> SyncedSamplePair {
        SyncedSamplePair {
            t,
            estimate_xy: est,
            reference_xy: refr,
        }
    }

    #[test]
    fn horizontal_error_345_triangle() {
        let errs = horizontal_errors(&[pair(0.0, (1.0, 2.0), (4.0, 6.0))]);
        assert_eq!(errs[0].horizontal_error, 5.0);
    }

    #[test]
    fn horizontal_error_ignores_z() {
        // z only differs through the trajectory, never enters the pair; the
        // pair type itself is planar, so a zero planar offset means zero error.
        let errs = horizontal_errors(&[pair(0.0, (0.0, 0.0), (0.0, 0.0))]);
        assert_eq!(errs[0].horizontal_error, 0.0);
    }

    #[test]
    fn percentile_examples() {
        assert_eq!(percentile(&[0.0, 10.0], 0.5).unwrap(), 5.0);
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!((percentile(&v, 0.95).unwrap() - 4.8).abs() < 1e-12);
        assert_eq!(percentile(&[7.5], 0.3).unwrap(), 7.5);
        assert_eq!(percentile(&[], 0.5), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn cdf_examples() {
        let c = cdf(&[2.0, 1.0]).unwrap();
        assert_eq!(c.points(), &[(1.0, 0.5), (2.0, 1.0)]);
        let c = cdf(&[3.0, 3.0, 3.0]).unwrap();
        assert_eq!(c.points(), &[(3.0, 1.0)]);
    }

    #[test]
    fn aggregate_mean_and_shortfall() {
        let exp = |rep, h95| ExperimentMetrics {
            scenario_id: "s".into(),
            repetition: rep,
            n_samples: 33,
            h95,
            median: h95 * 0.7,
            mean: h95 * 0.6,
        };
        let (m, warn) = aggregate_scenario(&[exp(1, 0.04), exp(2, 0.05), exp(3, 0.06)], 3).unwrap();
        assert!((m.mean_h95 - 0.05).abs() < 1e-12);
        assert!(warn.is_none());

        let (m, warn) = aggregate_scenario(&[exp(1, 0.2)], 3).unwrap();
        assert_eq!(m.mean_h95, 0.2);
        assert_eq!(warn.unwrap().actual, 1);
    }

    #[test]
    fn repeatability_identical_and_disjoint() {
        let a = cdf(&[1.0, 2.0]).unwrap();
        let b = cdf(&[3.0, 4.0]).unwrap();
        assert_eq!(repeatability(&[a.clone(), a.clone()]).unwrap(), 0.0);
        assert_eq!(repeatability(&[a, b]).unwrap(), 1.0);
        assert_eq!(
            repeatability(&[cdf(&[1.0]).unwrap()]),
            Err(MetricsError::TooFewCurves(1))
        );
    }

    #[test]
    fn repeatability_same_distribution_stays_small() {
        // Three draws of n = 1000 from one distribution: the largest pairwise
        // KS distance concentrates well below 0.1 (~1.36/sqrt(n/2) at 95%).
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let curves: Vec<CdfCurve> = (0..3)
            .map(|_| {
                let values: Vec<f64> = (0..1000)
                    .map(|_| {
                        let x: f64 = rng.random();
                        let y: f64 = rng.random();
                        x.hypot(y)
                    })
                    .collect();
                cdf(&values).unwrap()
            })
            .collect();
        let dist = repeatability(&curves).unwrap();
        assert!(dist < 0.1, "distance {dist}");
        assert!(dist > 0.0);
    }

    proptest! {
        #[test]
        fn percentile_monotone_and_bounded(
            mut values in proptest::collection::vec(0.0f64..100.0, 1..40),
            q1 in 0.0f64..=1.0,
            q2 in 0.0f64..=1.0,
        ) {
            let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
            let p_lo = percentile(&values, lo).unwrap();
            let p_hi = percentile(&values, hi).unwrap();
            prop_assert!(p_lo <= p_hi);
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            prop_assert!(*values.first().unwrap() <= p_lo);
            prop_assert!(p_hi <= *values.last().unwrap());
        }

        #[test]
        fn cdf_readoff_consistent_with_percentile(
            values in proptest::collection::vec(0.0f64..10.0, 2..60),
            q in 0.01f64..0.99,
        ) {
            let curve = cdf(&values).unwrap();
            let from_cdf = curve.quantile(q);
            let from_percentile = percentile(&values, q).unwrap();
            // Both must land within one step of each other.
            let mut sorted = values.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let max_gap = sorted
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(0.0f64, f64::max);
            prop_assert!((from_cdf - from_percentile).abs() <= max_gap + 1e-12);
        }

        #[test]
        fn errors_invariant_under_common_rigid_transform(
            pts in proptest::collection::vec((0.0f64..10.0, 0.0f64..10.0, 0.0f64..10.0, 0.0f64..10.0), 1..30),
            yaw in 0.0f64..std::f64::consts::TAU,
            tx in -50.0f64..50.0,
            ty in -50.0f64..50.0,
        ) {
            let rot = |x: f64, y: f64| (
                x * yaw.cos() - y * yaw.sin() + tx,
                x * yaw.sin() + y * yaw.cos() + ty,
            );
            let base: Vec<SyncedSamplePair> = pts
                .iter()
                .enumerate()
                .map(|(i, &(ex, ey, rx, ry))| pair(i as f64, (ex, ey), (rx, ry)))
                .collect();
            let moved: Vec<SyncedSamplePair> = base
                .iter()
                .map(|p| pair(p.t, rot(p.estimate_xy.0, p.estimate_xy.1), rot(p.reference_xy.0, p.reference_xy.1)))
                .collect();
            for (a, b) in horizontal_errors(&base).iter().zip(horizontal_errors(&moved)) {
                prop_assert!((a.horizontal_error - b.horizontal_error).abs() < 1e-9);
            }
        }
    }
}
