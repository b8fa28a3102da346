//! Power iteration clustering of one multi-modal class.
//!
//! `cargo run --example pic_clustering`

use online_cl::clustering::{build_affinity_graph, cluster_with, power_iteration_vector, ClusterParams};
use online_cl::data::{generate_blob_stream, BlobSpec};

fn main() -> online_cl::Result<()> {
    // one class made of three sub-populations
    let mut spec = BlobSpec::new(2, 2, vec![120, 2], 0.15, 4);
    spec.modes_per_class = 3;
    let part = generate_blob_stream(&spec)?;
    let feats: Vec<Vec<f64>> = part.train[&0].iter().map(|s| s.payload.values().to_vec()).collect();

    let params = ClusterParams::default();
    let graph = build_affinity_graph(&feats, params.k, params.sigma)?;
    let edges: usize = graph.rows.iter().map(Vec::len).sum();
    println!("{} points, {edges} stored k-NN edges (k = {})", graph.size(), graph.neighbor_count);

    let pi = power_iteration_vector(&graph, params.alpha, params.tol, params.max_iters);
    let (lo, hi) = pi.s.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    println!("power iteration: {} updates, s in [{lo:.5}, {hi:.5}]", pi.iterations);

    let clusters = cluster_with(&feats, &params)?;
    println!("{} clusters", clusters.len());
    for (i, c) in clusters.clusters.iter().enumerate() {
        let mean: Vec<f64> = (0..2)
            .map(|t| c.iter().map(|&m| feats[m][t]).sum::<f64>() / c.len() as f64)
            .collect();
        println!("  cluster {i}: {:3} members around ({:.2}, {:.2})", c.len(), mean[0], mean[1]);
    }
    Ok(())
}
