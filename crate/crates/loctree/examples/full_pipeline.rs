//! The whole chain in one process: simulate a campaign with a planted
//! ground-truth tree, evaluate every experiment, categorize the scenarios,
//! learn a tree from the labels, and check it predicts like the planted one.
//!
//! ```bash
//! cargo run -p loctree --example full_pipeline
//! ```

use loctree::dtree::{predict, render, RenderFormat};
use loctree::pipeline::{cmd_categorize, cmd_evaluate, cmd_learn, cmd_simulate, RunConfig, SchemeSelect};
use loctree::synth::{demo_application_tree, demo_class_ranges, demo_datasets, plant_labeled_dataset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = 7u64;
    let work = tempfile::tempdir()?;

    // Stage 0: synthetic campaign with known ground truth.
    let manifest = cmd_simulate(None, &work.path().join("dataset"), Some(seed))?;
    println!("simulated:   {}", manifest.display());

    let mut config = RunConfig::new(&manifest, work.path().join("reports"));
    config.scheme = SchemeSelect::Both;

    // Stage A: test and evaluation.
    let eval = cmd_evaluate(&config)?;
    println!(
        "evaluated:   {} experiments across {} scenarios",
        eval.experiments, eval.scenarios
    );

    // Stage B: output categorization.
    let cat = cmd_categorize(&config)?;
    println!(
        "categorized: {} scenarios (technology clustering chose k = {})",
        cat.labeled,
        cat.technology_k.unwrap()
    );

    // Stage C: decision tree learning.
    let learn = cmd_learn(&config)?;
    let (_, tree) = learn
        .trees
        .iter()
        .find(|(kind, _)| *kind == loctree::model::SchemeKind::Application)
        .expect("application tree");
    println!("\nlearned application tree:\n{}", render(tree, RenderFormat::Text));

    // The learned tree labels every planted scenario like the ground truth.
    let planted = plant_labeled_dataset(
        &demo_application_tree(),
        &demo_datasets(),
        &demo_class_ranges(),
        seed,
    )?;
    let hits = planted
        .iter()
        .filter(|p| predict(tree, &p.scenario.assignment).unwrap().label == p.label)
        .count();
    println!("planted-label agreement: {hits}/{}", planted.len());
    Ok(())
}
