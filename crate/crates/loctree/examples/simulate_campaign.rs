//! Materialize the built-in synthetic campaign on disk: 40 scenarios across
//! two localization systems, 3 repetitions each, in exactly the trajectory
//! CSV and manifest JSON formats the evaluation pipeline ingests.
//!
//! ```bash
//! cargo run -p loctree --example simulate_campaign
//! ```

use loctree::synth::{default_plan, write_dataset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let plan = default_plan(42);
    println!(
        "campaign: {} datasets, {} repetitions, {} evaluation poses per run",
        plan.datasets.len(),
        plan.repetitions,
        plan.params.eval_count
    );

    let out_dir = std::env::temp_dir().join("loctree_campaign");
    let manifest = write_dataset(&plan, &out_dir)?;
    println!("manifest: {}", manifest.display());

    let n_files = std::fs::read_dir(out_dir.join("trajectories"))?.count();
    println!("trajectory files: {n_files}");
    println!();
    println!("next steps:");
    println!("  loctree evaluate   --manifest {} --out out/", manifest.display());
    println!("  loctree categorize --manifest {} --out out/", manifest.display());
    println!("  loctree learn      --manifest {} --out out/", manifest.display());
    Ok(())
}
