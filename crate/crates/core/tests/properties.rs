use std::collections::BTreeSet;

use ndarray::Array2;
use online_cl::augment::{augment_features, augment_image, gaussian_blur, AugmentPolicy};
use online_cl::clustering::{
    build_affinity_graph, cluster_with, power_iteration_vector, ClusterAssignment, ClusterParams,
};
use online_cl::data::{export_feature_csv, ingest_feature_csv, Image, Sample, StreamPartition, TaskSchedule};
use online_cl::eval::{evaluate_step, summarize, Averaging, ModelPredictor, RunMetrics};
use online_cl::memory::{
    cluster_quotas, greedy_balanced_update, herding_order, reservoir_update, select_cluster_exemplars,
    select_from_clusters, ExemplarSet, SelectionPolicy,
};
use online_cl::nn::{
    distillation_loss, load_checkpoint, save_checkpoint, softened_entropy, softened_softmax, Architecture,
    Classifier,
};
use proptest::prelude::*;
use proptest::test_runner::RngSeed;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        rng_seed: RngSeed::Fixed(0x0c1),
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn points(max_n: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-2.0f64..2.0, dim), 1..=max_n)
}

fn normalized(mut clusters: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    clusters.iter_mut().for_each(|c| c.sort_unstable());
    clusters.sort();
    clusters
}

fn model_strategy() -> impl Strategy<Value = Classifier> {
    (1usize..5, 1usize..5, 0usize..6, any::<u64>()).prop_map(|(d, heads, hidden, seed)| {
        let arch = if hidden == 0 {
            Architecture::Linear
        } else {
            Architecture::Mlp { hidden }
        };
        Classifier::new(arch, d, heads, &mut ChaCha8Rng::seed_from_u64(seed))
    })
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn power_iteration_stays_normalized(pts in points(20, 3), k in 1usize..12, sigma in 0.2f64..2.0, alpha in 0.0f64..0.5) {
        let g = build_affinity_graph(&pts, k, sigma).unwrap();
        let pi = power_iteration_vector(&g, alpha, 1e-9, 50);
        let total: f64 = pi.s.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(pi.s.iter().all(|&v| v >= 0.0));
        prop_assert!(g.rows.iter().enumerate().all(|(i, r)| r.len() <= k && r.iter().all(|&(j, w)| j != i && w > 0.0 && w <= 1.0)));
    }

    #[test]
    fn clusters_partition_the_class(pts in points(25, 2), k in 1usize..12, sigma in 0.2f64..1.5) {
        let params = ClusterParams { k, sigma, ..ClusterParams::default() };
        let c = cluster_with(&pts, &params).unwrap();
        prop_assert!(!c.is_empty() && c.len() <= pts.len());
        prop_assert!(c.clusters.iter().all(|m| !m.is_empty()));
        let all: Vec<usize> = c.clusters.iter().flatten().copied().collect();
        let unique: BTreeSet<usize> = all.iter().copied().collect();
        prop_assert_eq!(all.len(), pts.len());
        prop_assert_eq!(unique, (0..pts.len()).collect::<BTreeSet<_>>());
    }

    #[test]
    fn clustering_ignores_input_order(pts in points(15, 2), seed in any::<u64>()) {
        let params = ClusterParams { k: 4, ..ClusterParams::default() };
        let mut perm: Vec<usize> = (0..pts.len()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let shuffled: Vec<Vec<f64>> = perm.iter().map(|&i| pts[i].clone()).collect();
        let base = cluster_with(&pts, &params).unwrap();
        let moved = cluster_with(&shuffled, &params).unwrap();
        let mapped: Vec<Vec<usize>> = moved.clusters.iter().map(|c| c.iter().map(|&i| perm[i]).collect()).collect();
        prop_assert_eq!(normalized(base.clusters), normalized(mapped));
    }

    #[test]
    fn quotas_respect_budget(sizes in prop::collection::vec(1usize..15, 1..8), q in 1usize..60) {
        let quotas = cluster_quotas(&sizes, q);
        let total: usize = sizes.iter().sum();
        prop_assert_eq!(quotas.iter().sum::<usize>(), q.min(total));
        prop_assert!(quotas.iter().zip(&sizes).all(|(a, s)| a <= s));
        // the per-cluster share never falls below floor(q / n) where data allows
        let share = q / sizes.len();
        prop_assert!(quotas.iter().zip(&sizes).all(|(&a, &s)| a >= share.min(s)));
    }

    #[test]
    fn cluster_selection_is_a_deterministic_subset(pts in points(30, 2), q in 1usize..40) {
        let samples: Vec<Sample> = pts.iter().enumerate().map(|(i, p)| Sample::features(p.clone(), 3, i)).collect();
        let params = ClusterParams::default();
        let a = select_cluster_exemplars(&samples, &pts, q, &params).unwrap();
        let b = select_cluster_exemplars(&samples, &pts, q, &params).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.len(), q.min(pts.len()));
        let ids: BTreeSet<usize> = a.iter().map(|s| s.arrival_index).collect();
        prop_assert_eq!(ids.len(), a.len());
        prop_assert!(a.iter().all(|s| samples[s.arrival_index] == *s));
        // a bigger budget never covers fewer samples or clusters
        let clusters = cluster_with(&pts, &params).unwrap();
        let covered = |q: usize| {
            let picks: BTreeSet<usize> = select_from_clusters(&pts, &clusters, q).into_iter().collect();
            clusters.clusters.iter().filter(|c| c.iter().any(|i| picks.contains(i))).count()
        };
        prop_assert!(covered(q) <= covered(q + 1));
    }

    #[test]
    fn single_cluster_first_pick_is_herding_first_pick(pts in points(20, 3)) {
        let one = ClusterAssignment { clusters: vec![(0..pts.len()).collect()], iterations_used: 0 };
        prop_assert_eq!(select_from_clusters(&pts, &one, 1), herding_order(&pts, 1));
    }

    #[test]
    fn capacity_memories_stay_within_budget(labels in prop::collection::vec(0usize..5, 0..200), cap in 1usize..30, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut reservoir = ExemplarSet::new(SelectionPolicy::Reservoir, cap);
        let mut greedy = ExemplarSet::new(SelectionPolicy::GreedyBalanced, cap);
        for (i, &c) in labels.iter().enumerate() {
            reservoir_update(&mut reservoir, Sample::features(vec![i as f64], c, i), &mut rng);
            greedy_balanced_update(&mut greedy, Sample::features(vec![i as f64], c, i), &mut rng);
            prop_assert!(reservoir.len() <= cap && greedy.len() <= cap);
        }
        prop_assert!(reservoir.check_invariants().is_ok());
        prop_assert!(greedy.check_invariants().is_ok());
        prop_assert_eq!(reservoir.len(), labels.len().min(cap));
        prop_assert_eq!(reservoir.stream_counter, labels.len() as u64);
    }

    #[test]
    fn softened_distribution_is_valid(logits in prop::collection::vec(-30.0f64..30.0, 1..10), t in 1.01f64..8.0) {
        let p = softened_softmax(&logits, t);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn distillation_bounded_below_by_teacher_entropy(
        teacher in prop::collection::vec(-5.0f64..5.0, 1..6),
        extra in prop::collection::vec(-5.0f64..5.0, 0..4),
        noise in prop::collection::vec(-3.0f64..3.0, 6),
        t in 1.01f64..5.0,
    ) {
        let n = teacher.len();
        let mut student: Vec<f64> = teacher.iter().zip(&noise).map(|(a, b)| a + b).collect();
        student.extend(&extra);
        let ld = distillation_loss(&student, &teacher, n, t).unwrap();
        prop_assert!(ld >= softened_entropy(&teacher, t) - 1e-12);
    }

    #[test]
    fn grow_head_keeps_old_logits(model in model_strategy(), grow in 1usize..4, x in prop::collection::vec(-3.0f64..3.0, 12)) {
        let d = model.input_dim;
        let rows = 12 / d;
        let x = Array2::from_shape_vec((rows, d), x[..rows * d].to_vec()).unwrap();
        let before = model.forward(&x).unwrap();
        let mut grown = model.clone();
        grown.grow_head(grow).unwrap();
        let after = grown.forward(&x).unwrap();
        prop_assert_eq!(after.ncols(), before.ncols() + grow);
        for r in 0..rows {
            for c in 0..before.ncols() {
                prop_assert_eq!(after[[r, c]].to_bits(), before[[r, c]].to_bits());
            }
        }
    }

    #[test]
    fn image_augmentation_stays_in_range(
        h in 1usize..7, w in 1usize..7, ch in prop::sample::select(vec![1usize, 3]),
        seed in any::<u64>(), blur in 0.0f64..=1.0, flip in 0.0f64..=1.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..h * w * ch).map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
        let img = Image::new(h, w, ch, data).unwrap();
        let policy = AugmentPolicy { blur_probability: blur, flip_probability: flip, ..AugmentPolicy::default() };
        let out = augment_image(&img, &policy, &mut rng);
        prop_assert_eq!((out.height, out.width, out.channels), (h, w, ch));
        prop_assert!(out.data.iter().all(|v| (0.0..=1.0).contains(v)));
        let blurred = gaussian_blur(&img, 0.8);
        let mass = |im: &Image| im.data.iter().sum::<f64>();
        prop_assert!((mass(&blurred) - mass(&img)).abs() < 1e-9 * (1.0 + mass(&img)));
        let feats = augment_features(&img.data, &policy, &mut rng);
        prop_assert_eq!(feats.len(), img.data.len());
    }

    #[test]
    fn accuracy_ignores_test_order(model in model_strategy(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let heads = model.head_count();
        let classes: Vec<usize> = (0..heads).map(|c| c * 10).collect();
        let mut test: Vec<Sample> = (0..40)
            .map(|i| {
                let x = (0..model.input_dim).map(|_| rand::Rng::random_range(&mut rng, -2.0..2.0)).collect();
                Sample::features(x, classes[i % heads], i)
            })
            .collect();
        let checksum = model.checksum();
        let p = ModelPredictor { model: &model, classes: &classes };
        let a = evaluate_step(&p, &test, 1, Averaging::Micro).unwrap();
        let m = evaluate_step(&p, &test, 1, Averaging::Macro).unwrap();
        test.shuffle(&mut rng);
        prop_assert_eq!(a, evaluate_step(&p, &test, 1, Averaging::Micro).unwrap());
        prop_assert_eq!(m, evaluate_step(&p, &test, 1, Averaging::Macro).unwrap());
        prop_assert_eq!(model.checksum(), checksum);
    }

    #[test]
    fn summaries_match_entries(acc in prop::collection::vec(0.0f64..=1.0, 1..8), initial in any::<bool>()) {
        let r = RunMetrics::new("m", 0, 1, initial, acc.clone()).unwrap();
        prop_assert!(r.is_consistent());
        prop_assert_eq!(r.last, *acc.last().unwrap());
        let (avg, _) = summarize(&acc, true).unwrap();
        prop_assert!((avg - acc.iter().sum::<f64>() / acc.len() as f64).abs() < 1e-15);
    }

    #[test]
    fn schedules_partition_classes(n in 2usize..30, initial in 1usize..5, step in 1usize..5, seed in any::<u64>()) {
        prop_assume!(initial + step <= n);
        let ids: Vec<usize> = (0..n).map(|c| c * 3 + 1).collect();
        let s = TaskSchedule::build(&ids, initial, step, seed).unwrap();
        prop_assert_eq!(&s, &TaskSchedule::build(&ids, initial, step, seed).unwrap());
        let all: Vec<usize> = s.tasks().flatten().copied().collect();
        prop_assert_eq!(all.len(), n);
        prop_assert_eq!(all.iter().copied().collect::<BTreeSet<_>>(), ids.iter().copied().collect());
        prop_assert!(s.steps[..s.steps.len() - 1].iter().all(|t| t.len() == step));
    }

    #[test]
    fn streams_deliver_every_sample_once(counts in prop::collection::vec(2usize..20, 3..7), seed in any::<u64>()) {
        let samples: Vec<Sample> = counts
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| (0..n).map(move |i| Sample::features(vec![c as f64, i as f64], c, i)))
            .collect();
        let part = StreamPartition::from_samples(samples).with_test_split(0.25, seed).unwrap();
        let schedule = TaskSchedule::build(&part.classes(), 2, 1, seed).unwrap();
        let streams = part.task_streams(&schedule, seed).unwrap();
        for (k, stream) in streams.iter().enumerate() {
            let arrivals: BTreeSet<usize> = stream.iter().map(|s| s.arrival_index).collect();
            prop_assert_eq!(arrivals, (0..stream.len()).collect::<BTreeSet<_>>());
            let want: usize = schedule.tasks().nth(k).unwrap().iter().map(|c| part.train[c].len()).sum();
            prop_assert_eq!(stream.len(), want);
        }
        // train and test never share a payload
        let train: BTreeSet<Vec<u64>> = part.train.values().flatten().map(|s| s.payload.values().iter().map(|v| v.to_bits()).collect()).collect();
        prop_assert!(part.test.values().flatten().all(|s| !train.contains(&s.payload.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>())));
    }
}

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn checkpoints_round_trip(model in model_strategy(), grow in 0usize..3) {
        let mut model = model;
        if grow > 0 {
            model.grow_head(grow).unwrap();
            model.version = grow;
        }
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("m");
        save_checkpoint(&model, &stem).unwrap();
        let back = load_checkpoint(&stem).unwrap();
        prop_assert_eq!(back.checksum(), model.checksum());
        prop_assert_eq!(back, model);
    }

    #[test]
    fn feature_csv_round_trip(rows in prop::collection::vec((0usize..4, prop::collection::vec(-1e6f64..1e6, 3)), 1..20)) {
        let samples: Vec<Sample> = rows.iter().enumerate().map(|(i, (l, v))| Sample::features(v.clone(), *l, i)).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        export_feature_csv(&path, &samples).unwrap();
        let part = ingest_feature_csv(&path).unwrap();
        let mut back: Vec<Sample> = part.train.into_values().flatten().collect();
        back.sort_by_key(|s| s.arrival_index);
        prop_assert_eq!(back, samples);
    }
}
