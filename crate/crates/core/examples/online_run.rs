//! One seed of the online protocol on the desk stream: per-step accuracy
//! for the proposed learner against finetuning and the upper bound.
//!
//! `cargo run --release --example online_run`

use online_cl::eval::Averaging;
use online_cl::experiment::{run_online, ExperimentConfig};
use online_cl::learner::Method;

fn main() -> online_cl::Result<()> {
    let cfg = ExperimentConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/desk.toml"))?;
    let seed = 0;
    let partition = cfg.load_partition(seed)?;
    let n_classes = partition.classes().len();
    println!("{n_classes} classes, train counts {:?}", partition.counts().values().collect::<Vec<_>>());

    for method in [Method::UpperBound, Method::Ours, Method::Finetune] {
        let lc = cfg.learner_config(method, seed, n_classes);
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
        let m = &run.metrics[0];
        let steps: Vec<String> = m.per_step_accuracy.iter().map(|a| format!("{a:.3}")).collect();
        println!("{method:12} [{}]  Avg {:.3}  Last {:.3}", steps.join(" "), m.avg, m.last);
        if method == Method::Ours {
            println!("{:12} memory holds {} exemplars", "", run.learner.memory().len());
        }
    }
    Ok(())
}
