//! Runs a config file as a (method × seed) grid in parallel and lists what
//! was written. Pass a config path, or the desk config is used.
//!
//! `cargo run --release --example experiment_grid -- [config.toml]`

use online_cl::eval::aggregate_by_method;
use online_cl::experiment::{run_grid, ExperimentConfig};

fn main() -> online_cl::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/desk.toml").to_string());
    let cfg = ExperimentConfig::load(&path)?;
    let root = std::env::temp_dir().join(format!("ocl-grid-{}", std::process::id()));

    let outcome = run_grid(&cfg, &root, None)?;
    println!("{} cells, {} failed, exit code {}", outcome.cells.len(), outcome.failed(), outcome.exit_code());
    for &k in &cfg.experiment.top_k {
        for agg in aggregate_by_method(&outcome.runs(k))? {
            println!(
                "top-{k} {:12} Avg {:.3}±{:.3}  Last {:.3}±{:.3}",
                agg.method, agg.avg.mean, agg.avg.std, agg.last.mean, agg.last.std
            );
        }
    }

    let mut files: Vec<_> = std::fs::read_dir(&outcome.dir)?
        .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect::<Result<_, _>>()?;
    files.sort();
    println!("{}: {}", outcome.dir.display(), files.join(", "));
    std::fs::remove_dir_all(&root)?;
    Ok(())
}
