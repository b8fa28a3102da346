//! Cluster-based, herding and random exemplar selection on a class with
//! unequal sub-populations. Reports how many exemplars land in each mode.
//!
//! `cargo run --example exemplar_selection`

use online_cl::clustering::ClusterParams;
use online_cl::data::{generate_blob_stream, BlobSpec, Sample};
use online_cl::memory::{select_cluster_exemplars, select_herding_exemplars, select_random_exemplars};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn nearest_mode(x: &[f64], modes: &[Vec<f64>]) -> usize {
    (0..modes.len())
        .min_by(|&a, &b| {
            let da: f64 = modes[a].iter().zip(x).map(|(m, v)| (m - v).powi(2)).sum();
            let db: f64 = modes[b].iter().zip(x).map(|(m, v)| (m - v).powi(2)).sum();
            da.total_cmp(&db)
        })
        .unwrap()
}

fn main() -> online_cl::Result<()> {
    let mut spec = BlobSpec::new(2, 2, vec![300, 2], 0.2, 21);
    spec.modes_per_class = 4;
    let part = generate_blob_stream(&spec)?;
    let data: Vec<Sample> = part.train[&0].clone();
    let feats: Vec<Vec<f64>> = data.iter().map(|s| s.payload.values().to_vec()).collect();

    // the generating modes, recovered by clustering with a wide graph
    let wide = ClusterParams { k: 30, ..ClusterParams::default() };
    let modes: Vec<Vec<f64>> = online_cl::clustering::cluster_with(&feats, &wide)?
        .clusters
        .iter()
        .map(|c| (0..2).map(|t| c.iter().map(|&m| feats[m][t]).sum::<f64>() / c.len() as f64).collect())
        .collect();

    let q = 12;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let picks = [
        ("cluster", select_cluster_exemplars(&data, &feats, q, &ClusterParams::default())?),
        ("herding", select_herding_exemplars(&data, &feats, q)?),
        ("random", select_random_exemplars(&data, q, &mut rng)?),
    ];
    let mut population = vec![0; modes.len()];
    for f in &feats {
        population[nearest_mode(f, &modes)] += 1;
    }
    println!("mode sizes in the class:  {population:?}");
    for (name, chosen) in &picks {
        let mut per_mode = vec![0; modes.len()];
        for s in chosen {
            per_mode[nearest_mode(s.payload.values(), &modes)] += 1;
        }
        println!("{name:8} q = {q}: per mode {per_mode:?}");
    }
    Ok(())
}
