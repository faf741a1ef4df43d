//! Label scenario metrics two ways: against fixed application requirements,
//! and against technology-related classes derived by exact 1-D clustering
//! with an elbow-selected cluster count.
//!
//! ```bash
//! cargo run -p loctree --example categorize_scenarios
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use loctree::categorize::{
    classify_application, elbow_select_k, kmeans_1d_exact, roman_labels, scheme_from_clusters,
};
use loctree::model::ScenarioMetrics;
use loctree::synth::demo_application_scheme;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Synthetic per-scenario h95 values: a few excellent configurations, a
    // broad mid-range cloud, and a few degraded setups.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut values: Vec<f64> = Vec::new();
    for _ in 0..4 {
        values.push(rng.random_range(0.02..0.04));
    }
    for _ in 0..30 {
        values.push(rng.random_range(0.19..0.21));
    }
    for _ in 0..4 {
        values.push(rng.random_range(0.36..0.38));
    }

    let scenarios: Vec<ScenarioMetrics> = values
        .iter()
        .enumerate()
        .map(|(i, v)| ScenarioMetrics::new(format!("s{:02}", i + 1), vec![*v]).unwrap())
        .collect();

    // Application-related: fixed thresholds from process requirements.
    let app = demo_application_scheme();
    println!("application classes:");
    for class in app.classes() {
        println!("  {}: [{}, {}) m", class.label, class.lower, class.upper);
    }

    // Technology-related: elbow picks k, clustering yields the boundaries.
    let k = elbow_select_k(&values, 8)?;
    let clustering = kmeans_1d_exact(&values, k)?;
    let tech = scheme_from_clusters(&clustering, &roman_labels(k))?;
    println!("\ntechnology classes (elbow chose k = {k}, SSE {:.5}):", clustering.sse);
    for class in tech.classes() {
        println!("  {}: [{:.4}, {:.4}) m", class.label, class.lower, class.upper);
    }
    println!("  {}: beyond", tech.overflow_label);

    println!("\nscenario            h95  app  tech");
    for m in &scenarios {
        let app_label = classify_application(m, &app).class_label.unwrap();
        let tech_label = classify_application(m, &tech).class_label.unwrap();
        println!(
            "{:>8}  {:>12.4}  {:>3}  {:>4}",
            m.scenario_id, m.mean_h95, app_label, tech_label
        );
    }
    Ok(())
}
