//! Learn a decision tree over influencing factors, inspect which factors
//! matter on each root-to-leaf path, predict new configurations, and render.
//!
//! ```bash
//! cargo run -p loctree --example learn_decision_tree
//! ```

use std::collections::BTreeMap;

use loctree::dtree::{
    join_schemas, learn_tree, predict, relevance, render, LabeledRecord, RenderFormat,
};
use loctree::model::FactorValue;
use loctree::synth::{
    demo_application_tree, demo_class_ranges, demo_datasets, plant_labeled_dataset,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // 40 labeled scenarios: full factorial over two localization systems
    // with labels planted by a known ground-truth tree.
    let datasets = demo_datasets();
    let planted = plant_labeled_dataset(
        &demo_application_tree(),
        &datasets,
        &demo_class_ranges(),
        42,
    )?;
    let records: Vec<LabeledRecord> = planted
        .iter()
        .map(|p| LabeledRecord {
            features: p.scenario.assignment.clone(),
            label: p.label.clone(),
        })
        .collect();

    let schemas: Vec<_> = datasets.iter().map(|d| d.schema().unwrap()).collect();
    let joint = join_schemas(&schemas.iter().collect::<Vec<_>>())?;
    let tree = learn_tree(&records, &joint)?;

    println!("{}", render(&tree, RenderFormat::Text));

    println!("per-leaf factor relevance:");
    for leaf in relevance(&tree) {
        println!(
            "  leaf {:>2} [{}] n={:<2} relevant: {:<40} irrelevant: {}",
            leaf.leaf_id,
            leaf.label,
            leaf.support,
            leaf.relevant.join(" > "),
            leaf.irrelevant.join(", ")
        );
    }

    // Route a new configuration.
    let mut config: BTreeMap<String, FactorValue> = BTreeMap::new();
    config.insert("ILS".into(), FactorValue::Categorical("LiDAR".into()));
    config.insert("MapQuality".into(), FactorValue::Continuous(0.9));
    config.insert("FoV".into(), FactorValue::Continuous(270.0));
    config.insert("Reflector".into(), FactorValue::Categorical("off".into()));
    config.insert("Dynamics".into(), FactorValue::Categorical("no".into()));
    let p = predict(&tree, &config)?;
    println!("\nLiDAR, map 0.9, FoV 270, no reflector, static -> class {}", p.label);

    // Values outside the training range are flagged, not trusted.
    config.insert("FoV".into(), FactorValue::Continuous(5.0));
    let p = predict(&tree, &config)?;
    println!(
        "same with FoV 5 deg -> class {} (extrapolating on: {})",
        p.label,
        p.extrapolation.join(", ")
    );
    Ok(())
}
