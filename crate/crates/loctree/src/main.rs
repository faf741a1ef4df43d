use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use loctree::pipeline::{
    cmd_categorize, cmd_evaluate, cmd_learn, cmd_map_quality, cmd_report, cmd_simulate,
    map_quality_report_json, PipelineError, RunConfig, SchemeSelect,
};

#[derive(Parser)]
#[command(name = "loctree", version)]
#[command(about = "Localization accuracy evaluation, categorization, and decision-tree analysis")]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Application,
    Technology,
    Both,
}

impl From<SchemeArg> for SchemeSelect {
    fn from(value: SchemeArg) -> Self {
        match value {
            SchemeArg::Application => SchemeSelect::Application,
            SchemeArg::Technology => SchemeSelect::Technology,
            SchemeArg::Both => SchemeSelect::Both,
        }
    }
}

#[derive(clap::Args)]
struct StageArgs {
    /// Manifest JSON describing schemas, scenarios, and experiment files
    #[arg(long)]
    manifest: PathBuf,

    /// Output directory for reports (shared across stages)
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Driving percentile fraction for the position-error metric
    #[arg(long, default_value_t = 0.95)]
    percentile: f64,

    /// Maximum interpolation gap in seconds
    #[arg(long, default_value_t = loctree::ingest::DEFAULT_MAX_GAP)]
    max_gap: f64,

    /// Categorization scheme(s)
    #[arg(long, value_enum, default_value_t = SchemeArg::Both)]
    scheme: SchemeArg,

    /// Largest cluster count probed by the elbow criterion
    #[arg(long, default_value_t = 8)]
    k_max: usize,

    /// Abort learning when labels are inconsistent
    #[arg(long)]
    strict: bool,
}

impl StageArgs {
    fn config(&self) -> RunConfig {
        let mut config = RunConfig::new(&self.manifest, &self.out);
        config.percentile_q = self.percentile;
        config.max_gap = self.max_gap;
        config.scheme = self.scheme.into();
        config.k_max = self.k_max;
        config.strict = self.strict;
        config
    }
}

#[derive(Subcommand)]
enum Commands {
    /// Compute per-experiment and per-scenario accuracy metrics
    Evaluate(StageArgs),

    /// Label scenarios with performance classes
    Categorize(StageArgs),

    /// Learn decision trees from labeled scenarios
    Learn(StageArgs),

    /// Run evaluate, categorize, and learn in sequence
    Report(StageArgs),

    /// Score how well two 2-D contour maps match (ICP fitness in [0, 1])
    MapQuality {
        /// Source map CSV (header `x,y`)
        map_a: PathBuf,
        /// Target map CSV (header `x,y`)
        map_b: PathBuf,
        /// Inlier radius in meters
        #[arg(long, default_value_t = 0.1)]
        inlier_radius: f64,
        /// Maximum ICP iterations
        #[arg(long, default_value_t = 50)]
        max_iters: usize,
        /// Write the JSON report here as well
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Generate a synthetic dataset with planted ground truth
    Simulate {
        /// Output directory for the dataset
        #[arg(long)]
        out: PathBuf,
        /// Campaign plan JSON; omitted, the built-in 40-scenario campaign runs
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Master seed for all randomness
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Commands::Evaluate(args) => {
            let summary = cmd_evaluate(&args.config())?;
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "evaluated {} experiments across {} scenarios -> {}",
                summary.experiments,
                summary.scenarios,
                args.out.display()
            );
        }
        Commands::Categorize(args) => {
            let summary = cmd_categorize(&args.config())?;
            match summary.technology_k {
                Some(k) => println!(
                    "labeled {} scenarios (technology scheme: k = {k})",
                    summary.labeled
                ),
                None => println!("labeled {} scenarios", summary.labeled),
            }
        }
        Commands::Learn(args) => {
            let summary = cmd_learn(&args.config())?;
            for (kind, tree) in &summary.trees {
                let (internal, leaves) = tree.node_counts();
                println!("tree_{kind}: {internal} internal nodes, {leaves} leaves");
            }
            if summary.impure_leaves > 0 {
                eprintln!(
                    "warning: {} impure leaf/leaves (inconsistent labels)",
                    summary.impure_leaves
                );
            }
        }
        Commands::Report(args) => {
            let (eval, cat, learn) = cmd_report(&args.config())?;
            for w in &eval.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "evaluated {} experiments, labeled {} scenarios, learned {} tree(s)",
                eval.experiments,
                cat.labeled,
                learn.trees.len()
            );
        }
        Commands::MapQuality {
            map_a,
            map_b,
            inlier_radius,
            max_iters,
            out,
        } => {
            let score =
                cmd_map_quality(&map_a, &map_b, inlier_radius, max_iters, out.as_deref())?;
            println!("fitness: {}", score.fitness);
            println!("inlier_rmse: {}", score.inlier_rmse);
            print!("{}", map_quality_report_json(&score));
        }
        Commands::Simulate { out, plan, seed } => {
            let manifest = cmd_simulate(plan.as_deref(), &out, seed)?;
            println!("wrote {}", manifest.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code as u8)
        }
    }
}
