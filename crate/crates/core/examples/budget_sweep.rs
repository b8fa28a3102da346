//! Avg accuracy as the per-class exemplar budget grows. Results go to a
//! temporary directory; the table is printed.
//!
//! `cargo run --release --example budget_sweep`

use online_cl::experiment::{run_budget_sweep_grid, ExperimentConfig};
use online_cl::learner::Method;

fn main() -> online_cl::Result<()> {
    let mut cfg = ExperimentConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/desk.toml"))?;
    cfg.experiment.methods = vec![Method::Ours, Method::IcarlNcm, Method::Er];
    cfg.experiment.seeds = vec![0, 1, 2];
    cfg.experiment.checkpoints = false;

    let root = std::env::temp_dir().join(format!("ocl-budget-sweep-{}", std::process::id()));
    let (table, code) = run_budget_sweep_grid(&cfg, &[5, 10, 20, 50], &root, None)?;
    print!("{}", table.render());
    println!("exit code {code}");
    std::fs::remove_dir_all(&root)?;
    Ok(())
}
