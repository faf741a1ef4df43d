//! Compute accuracy metrics for one synthetic experiment: synchronize the
//! estimate with the reference at the evaluation poses, take horizontal
//! errors, and report percentiles and the empirical CDF.
//!
//! ```bash
//! cargo run -p loctree --example evaluate_accuracy
//! ```

use std::collections::BTreeMap;

use loctree::ingest::sync_pairs;
use loctree::metrics::{cdf, horizontal_errors, percentile, ExperimentMetrics};
use loctree::model::Scenario;
use loctree::synth::{
    generate_experiment, rayleigh_quantile_factor, GenerationParams, NoiseSpec, PlantedScenario,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sigma = 0.02;
    let plan = PlantedScenario {
        scenario: Scenario {
            id: "demo".into(),
            assignment: BTreeMap::new(),
        },
        label: "?".into(),
        noise: NoiseSpec::gaussian(sigma),
        target_h95: sigma * rayleigh_quantile_factor(0.95),
    };
    let params = GenerationParams {
        speed: 0.3,
        rate: 20.0,
        eval_count: 500,
    };
    let record = generate_experiment(&plan, 1, &loctree::synth::demo_waypoints(), &params, 42)?;

    let pairs = sync_pairs(&record, 0.1)?;
    let errors = horizontal_errors(&pairs);
    let metrics = ExperimentMetrics::from_errors("demo", 1, &errors, 0.95)?;

    println!("samples:  {}", metrics.n_samples);
    println!("mean:     {:.4} m", metrics.mean);
    println!("median:   {:.4} m", metrics.median);
    println!("h95:      {:.4} m (expected {:.4})", metrics.h95, plan.target_h95);

    let values: Vec<f64> = errors.iter().map(|e| e.horizontal_error).collect();
    let curve = cdf(&values)?;
    println!("\nempirical CDF read-offs:");
    for q in [0.5, 0.8, 0.9, 0.95, 0.99] {
        println!(
            "  q = {q:>4}: cdf {:.4} m, percentile {:.4} m",
            curve.quantile(q),
            percentile(&values, q)?
        );
    }
    Ok(())
}
