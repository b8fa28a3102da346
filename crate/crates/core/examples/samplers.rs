//! Reservoir and greedy class-balancing memories on an imbalanced,
//! class-incremental stream.
//!
//! `cargo run --example samplers`

use online_cl::data::Sample;
use online_cl::memory::{draw_replay, greedy_balanced_update, reservoir_update, ExemplarSet, SelectionPolicy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> online_cl::Result<()> {
    let sizes = [400, 50, 200, 25, 100];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut reservoir = ExemplarSet::new(SelectionPolicy::Reservoir, 50);
    let mut greedy = ExemplarSet::new(SelectionPolicy::GreedyBalanced, 50);
    let mut arrival = 0;
    for (class, &n) in sizes.iter().enumerate() {
        for _ in 0..n {
            let s = Sample::features(vec![arrival as f64], class, arrival);
            reservoir_update(&mut reservoir, s.clone(), &mut rng);
            greedy_balanced_update(&mut greedy, s, &mut rng);
            arrival += 1;
        }
    }
    let counts = |m: &ExemplarSet| -> Vec<usize> {
        (0..sizes.len()).map(|c| m.per_class.get(&c).map_or(0, Vec::len)).collect()
    };
    println!("stream class sizes: {sizes:?}");
    println!("reservoir (K = 50): {:?}", counts(&reservoir));
    println!("greedy    (K = 50): {:?}", counts(&greedy));

    let replay = draw_replay(&greedy, 16, &mut rng)?;
    let labels: Vec<usize> = replay.iter().map(|s| s.label).collect();
    println!("16 replay draws:    {labels:?}");
    Ok(())
}
