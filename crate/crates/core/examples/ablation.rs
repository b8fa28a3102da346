//! Isolates exemplar selection from the batch regime: herding or cluster
//! exemplars, trained with random replay or balanced contrastive batches.
//!
//! `cargo run --release --example ablation`

use online_cl::eval::{aggregate_seeds, Averaging};
use online_cl::experiment::{run_online, ExperimentConfig};
use online_cl::learner::Method;

fn main() -> online_cl::Result<()> {
    let cfg = ExperimentConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/desk.toml"))?;
    let seeds = [0u64, 1, 2];
    println!("{:22} {:>14} {:>14}", "variant", "Avg", "Last");
    for tag in ["baseline", "baseline_our_exp", "baseline_our_regime", "ours"] {
        let method: Method = tag.parse()?;
        let mut runs = Vec::new();
        for &seed in &seeds {
            let partition = cfg.load_partition(seed)?;
            let lc = cfg.learner_config(method, seed, partition.classes().len());
            let run = run_online(
                &partition,
                cfg.data.initial_classes,
                cfg.data.step_size,
                lc,
                &[1],
                Averaging::Micro,
                true,
                |_, _| Ok(()),
            )?;
            runs.extend(run.metrics);
        }
        let agg = aggregate_seeds(&runs)?;
        println!(
            "{tag:22} {:>7.3}±{:.3} {:>7.3}±{:.3}",
            agg.avg.mean, agg.avg.std, agg.last.mean, agg.last.std
        );
    }
    Ok(())
}
