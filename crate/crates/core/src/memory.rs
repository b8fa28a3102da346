//! Exemplar memory: per-class stores under a budget and the selection and
//! update policies that fill them.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clustering::{cluster_with, ClusterAssignment, ClusterParams};
use crate::data::{ClassId, Sample};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionPolicy {
    /// Cluster-mean selection over power-iteration clusters.
    Cluster,
    Herding,
    Random,
    Reservoir,
    GreedyBalanced,
}

impl SelectionPolicy {
    /// Whether the budget is a total capacity rather than a per-class count.
    pub fn is_capacity(self) -> bool {
        matches!(self, Self::Reservoir | Self::GreedyBalanced)
    }
}

impl fmt::Display for SelectionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Cluster => "cluster",
            Self::Herding => "herding",
            Self::Random => "random",
            Self::Reservoir => "reservoir",
            Self::GreedyBalanced => "greedy_balanced",
        })
    }
}

impl FromStr for SelectionPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "cluster" => Self::Cluster,
            "herding" => Self::Herding,
            "random" => Self::Random,
            "reservoir" => Self::Reservoir,
            "greedy_balanced" | "greedy" => Self::GreedyBalanced,
            other => return Err(Error::Config(format!("unknown selection policy {other:?}"))),
        })
    }
}

/// Per-class exemplar store.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExemplarSet {
    pub per_class: BTreeMap<ClassId, Vec<Sample>>,
    /// Exemplars per class, or total capacity for capacity policies.
    pub budget: usize,
    pub policy: SelectionPolicy,
    /// Stream samples offered so far (reservoir bookkeeping).
    pub stream_counter: u64,
}

impl ExemplarSet {
    pub fn new(policy: SelectionPolicy, budget: usize) -> Self {
        Self {
            per_class: BTreeMap::new(),
            budget,
            policy,
            stream_counter: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.per_class.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn classes(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.per_class.iter().filter(|(_, v)| !v.is_empty()).map(|(&c, _)| c)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Sample> {
        self.per_class.values().flatten()
    }

    /// Stores exemplars for one class, replacing any previous entry.
    pub fn insert_class(&mut self, class: ClassId, exemplars: Vec<Sample>) -> Result<()> {
        if let Some(bad) = exemplars.iter().find(|s| s.label != class) {
            return Err(Error::InvalidInput(format!(
                "sample labelled {} stored under class {class}",
                bad.label
            )));
        }
        if !self.policy.is_capacity() && exemplars.len() > self.budget {
            return Err(Error::InvalidInput(format!(
                "{} exemplars exceed the per-class budget {}",
                exemplars.len(),
                self.budget
            )));
        }
        self.per_class.insert(class, exemplars);
        Ok(())
    }

    /// Checks the budget and label invariants.
    pub fn check_invariants(&self) -> Result<()> {
        for (&c, v) in &self.per_class {
            if v.iter().any(|s| s.label != c) {
                return Err(Error::InvalidInput(format!("mislabelled exemplar under class {c}")));
            }
            if !self.policy.is_capacity() && v.len() > self.budget {
                return Err(Error::InvalidInput(format!("class {c} holds {} > {}", v.len(), self.budget)));
            }
        }
        if self.policy.is_capacity() && self.len() > self.budget {
            return Err(Error::InvalidInput(format!("memory holds {} > {}", self.len(), self.budget)));
        }
        Ok(())
    }

    fn remove_global(&mut self, mut slot: usize) -> Sample {
        for v in self.per_class.values_mut() {
            if slot < v.len() {
                return v.remove(slot);
            }
            slot -= v.len();
        }
        unreachable!("slot beyond memory size")
    }

    fn get_global(&self, mut slot: usize) -> &Sample {
        for v in self.per_class.values() {
            if slot < v.len() {
                return &v[slot];
            }
            slot -= v.len();
        }
        unreachable!("slot beyond memory size")
    }

    fn push(&mut self, sample: Sample) {
        self.per_class.entry(sample.label).or_default().push(sample);
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let set: Self = serde_json::from_str(s)?;
        set.check_invariants()?;
        Ok(set)
    }
}

fn check_selection_input<F: AsRef<[f64]>>(class_data: &[Sample], features: &[F], q: usize) -> Result<()> {
    if class_data.is_empty() {
        return Err(Error::InvalidInput("no class data to select from".into()));
    }
    if features.len() != class_data.len() {
        return Err(Error::Shape(format!(
            "{} features for {} samples",
            features.len(),
            class_data.len()
        )));
    }
    if q == 0 {
        return Err(Error::InvalidInput("exemplar budget must be at least 1".into()));
    }
    Ok(())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn mean_of<F: AsRef<[f64]>>(features: &[F], members: &[usize]) -> Vec<f64> {
    let dim = features[members[0]].as_ref().len();
    let mut mu = vec![0.0; dim];
    for &m in members {
        mu.iter_mut().zip(features[m].as_ref()).for_each(|(a, b)| *a += b);
    }
    mu.iter_mut().for_each(|a| *a /= members.len() as f64);
    mu
}

/// Cluster members ordered by distance to the (fixed) cluster mean, lower
/// index first on ties: the order in which repeated nearest-to-mean picks
/// with removal visit them.
fn nearest_to_mean_order<F: AsRef<[f64]>>(features: &[F], members: &[usize]) -> Vec<usize> {
    let mu = mean_of(features, members);
    let mut order: Vec<(f64, usize)> = members.iter().map(|&m| (sq_dist(&mu, features[m].as_ref()), m)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    order.into_iter().map(|(_, m)| m).collect()
}

/// How many exemplars each cluster contributes for a budget `q`.
///
/// Clusters smaller than the current per-cluster share are taken whole and
/// the share is recomputed over the remaining clusters until no cluster is
/// too small. Leftover budget goes one exemplar per cluster, largest
/// remaining cluster first.
pub fn cluster_quotas(sizes: &[usize], q: usize) -> Vec<usize> {
    let mut quota = vec![0; sizes.len()];
    let mut active: Vec<usize> = (0..sizes.len()).collect();
    let mut budget = q;
    loop {
        if active.is_empty() {
            return quota;
        }
        let share = budget / active.len();
        let small: Vec<usize> = active.iter().copied().filter(|&c| sizes[c] < share).collect();
        if small.is_empty() {
            break;
        }
        for c in small {
            quota[c] = sizes[c];
            budget -= sizes[c];
        }
        active.retain(|&c| sizes[c] >= share);
    }
    let share = budget / active.len();
    for &c in &active {
        quota[c] = share;
    }
    let mut leftover = budget - share * active.len();
    let mut by_size = active.clone();
    by_size.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(a.cmp(&b)));
    for c in by_size {
        if leftover == 0 {
            break;
        }
        if quota[c] < sizes[c] {
            quota[c] += 1;
            leftover -= 1;
        }
    }
    quota
}

/// Exemplar indices for pre-computed clusters: each cluster contributes its
/// quota of nearest-to-cluster-mean members, clusters in order.
pub fn select_from_clusters<F: AsRef<[f64]>>(features: &[F], clusters: &ClusterAssignment, q: usize) -> Vec<usize> {
    let sizes: Vec<usize> = clusters.clusters.iter().map(Vec::len).collect();
    let quotas = cluster_quotas(&sizes, q);
    clusters
        .clusters
        .iter()
        .zip(quotas)
        .flat_map(|(members, quota)| {
            let mut order = nearest_to_mean_order(features, members);
            order.truncate(quota);
            order
        })
        .collect()
}

/// Clusters the class features and selects up to `q` exemplars spread over
/// the clusters by cluster-mean proximity.
pub fn select_cluster_exemplars<F: AsRef<[f64]>>(
    class_data: &[Sample],
    features: &[F],
    q: usize,
    params: &ClusterParams,
) -> Result<Vec<Sample>> {
    check_selection_input(class_data, features, q)?;
    let clusters = cluster_with(features, params)?;
    Ok(select_from_clusters(features, &clusters, q)
        .into_iter()
        .map(|i| class_data[i].clone())
        .collect())
}

/// Indices chosen by herding: the k-th pick minimises the distance between
/// the class mean and the mean of the first k picks.
pub fn herding_order<F: AsRef<[f64]>>(features: &[F], q: usize) -> Vec<usize> {
    let n = features.len();
    let all: Vec<usize> = (0..n).collect();
    let mu = mean_of(features, &all);
    let dim = mu.len();
    let mut running = vec![0.0; dim];
    let mut taken = vec![false; n];
    let mut picks = Vec::with_capacity(q.min(n));
    for k in 1..=q.min(n) {
        let mut best: Option<(f64, usize)> = None;
        for i in (0..n).filter(|&i| !taken[i]) {
            let f = features[i].as_ref();
            let d: f64 = (0..dim)
                .map(|t| {
                    let m = (running[t] + f[t]) / k as f64;
                    (mu[t] - m) * (mu[t] - m)
                })
                .sum();
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        let (_, i) = best.expect("candidates remain while k <= n");
        taken[i] = true;
        running.iter_mut().zip(features[i].as_ref()).for_each(|(r, v)| *r += v);
        picks.push(i);
    }
    picks
}

pub fn select_herding_exemplars<F: AsRef<[f64]>>(class_data: &[Sample], features: &[F], q: usize) -> Result<Vec<Sample>> {
    check_selection_input(class_data, features, q)?;
    Ok(herding_order(features, q).into_iter().map(|i| class_data[i].clone()).collect())
}

/// Uniform sample of `min(q, n)` items without replacement.
pub fn select_random_exemplars<R: Rng + ?Sized>(class_data: &[Sample], q: usize, rng: &mut R) -> Result<Vec<Sample>> {
    if class_data.is_empty() {
        return Err(Error::InvalidInput("no class data to select from".into()));
    }
    let amount = q.min(class_data.len());
    let mut picked = index::sample(rng, class_data.len(), amount).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| class_data[i].clone()).collect())
}

/// Reservoir rule over the global stream: append while below capacity,
/// otherwise replace a uniform slot with probability `K / seen`.
pub fn reservoir_update<R: Rng + ?Sized>(memory: &mut ExemplarSet, sample: Sample, rng: &mut R) {
    memory.stream_counter += 1;
    if memory.budget == 0 {
        return;
    }
    if memory.len() < memory.budget {
        memory.push(sample);
        return;
    }
    let j = rng.random_range(0..memory.stream_counter);
    if j < memory.budget as u64 {
        memory.remove_global(j as usize);
        memory.push(sample);
    }
}

/// Greedy class-balancing update: store while below capacity; when full,
/// admit a sample only if its class holds fewer than the largest class,
/// evicting a random sample from a largest class.
pub fn greedy_balanced_update<R: Rng + ?Sized>(memory: &mut ExemplarSet, sample: Sample, rng: &mut R) {
    memory.stream_counter += 1;
    if memory.budget == 0 {
        return;
    }
    if memory.len() < memory.budget {
        memory.push(sample);
        return;
    }
    let count = |c: ClassId| memory.per_class.get(&c).map_or(0, Vec::len);
    let max = memory.per_class.values().map(Vec::len).max().unwrap_or(0);
    if count(sample.label) >= max {
        return;
    }
    let largest: Vec<ClassId> = memory
        .per_class
        .iter()
        .filter(|(_, v)| v.len() == max)
        .map(|(&c, _)| c)
        .collect();
    let victim_class = largest[rng.random_range(0..largest.len())];
    let pool = memory.per_class.get_mut(&victim_class).unwrap();
    let slot = rng.random_range(0..pool.len());
    pool.remove(slot);
    memory.push(sample);
}

/// `count` exemplars drawn uniformly with replacement.
pub fn draw_replay<R: Rng + ?Sized>(memory: &ExemplarSet, count: usize, rng: &mut R) -> Result<Vec<Sample>> {
    let n = memory.len();
    if n == 0 {
        return Err(Error::EmptyMemory);
    }
    Ok((0..count)
        .map(|_| memory.get_global(rng.random_range(0..n)).clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line(points: &[f64], label: ClassId) -> (Vec<Sample>, Vec<Vec<f64>>) {
        let samples = points
            .iter()
            .enumerate()
            .map(|(i, &p)| Sample::features(vec![p], label, i))
            .collect();
        (samples, points.iter().map(|&p| vec![p]).collect())
    }

    #[test]
    fn cluster_mean_pick_on_a_line() {
        let (samples, feats) = line(&[0.0, 1.0, 2.0, 9.0], 0);
        let one = ClusterAssignment {
            clusters: vec![vec![0, 1, 2, 3]],
            iterations_used: 0,
        };
        assert_eq!(select_from_clusters(&feats, &one, 1), vec![2]);
        assert_eq!(select_from_clusters(&feats, &one, 10).len(), 4);
        let _ = samples;
    }

    #[test]
    fn small_cluster_fallback() {
        let feats: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let clusters = ClusterAssignment {
            clusters: vec![vec![0], (1..10).collect()],
            iterations_used: 0,
        };
        let picks = select_from_clusters(&feats, &clusters, 4);
        assert_eq!(picks.len(), 4);
        assert_eq!(picks[0], 0);
        assert_eq!(cluster_quotas(&[1, 9], 4), vec![1, 3]);
    }

    #[test]
    fn quotas_examples() {
        assert_eq!(cluster_quotas(&[5, 5], 4), vec![2, 2]);
        assert_eq!(cluster_quotas(&[5, 6], 5), vec![2, 3]);
        assert_eq!(cluster_quotas(&[1, 1, 6], 6), vec![1, 1, 4]);
        // more clusters than budget: one each, largest first
        assert_eq!(cluster_quotas(&[2, 5, 3], 2), vec![0, 1, 1]);
        assert_eq!(cluster_quotas(&[2, 2], 10), vec![2, 2]);
    }

    #[test]
    fn herding_examples() {
        let (samples, feats) = line(&[0.0, 1.0, 2.0, 9.0], 0);
        assert_eq!(herding_order(&feats, 2), vec![2, 1]);
        let all = select_herding_exemplars(&samples, &feats, 10).unwrap();
        assert_eq!(all.len(), 4);
        assert_eq!(herding_order(&feats, 4), herding_order(&feats, 10));
        assert!(select_herding_exemplars(&[], &Vec::<Vec<f64>>::new(), 2).is_err());
    }

    #[test]
    fn cluster_selection_rejects_empty() {
        let r = select_cluster_exemplars(&[], &Vec::<Vec<f64>>::new(), 3, &ClusterParams::default());
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn single_cluster_first_pick_matches_herding() {
        let (samples, feats) = line(&[0.0, 0.1, 0.15, 0.3, 0.32], 1);
        let a = select_cluster_exemplars(&samples, &feats, 1, &ClusterParams::default()).unwrap();
        let b = select_herding_exemplars(&samples, &feats, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reservoir_under_capacity_keeps_all() {
        let mut m = ExemplarSet::new(SelectionPolicy::Reservoir, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for i in 0..10 {
            reservoir_update(&mut m, Sample::features(vec![i as f64], i % 3, i), &mut rng);
        }
        assert_eq!(m.len(), 10);
        m.check_invariants().unwrap();
    }

    #[test]
    fn reservoir_capacity_one_is_fair() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let trials = 100_000;
        let mut second = 0;
        for _ in 0..trials {
            let mut m = ExemplarSet::new(SelectionPolicy::Reservoir, 1);
            reservoir_update(&mut m, Sample::features(vec![0.0], 0, 0), &mut rng);
            reservoir_update(&mut m, Sample::features(vec![1.0], 0, 1), &mut rng);
            if m.iter().next().unwrap().arrival_index == 1 {
                second += 1;
            }
        }
        let freq = second as f64 / trials as f64;
        assert!((freq - 0.5).abs() < 0.01, "{freq}");
    }

    fn stream(labels: &str) -> Vec<Sample> {
        labels
            .bytes()
            .enumerate()
            .map(|(i, b)| Sample::features(vec![i as f64], (b - b'A') as usize, i))
            .collect()
    }

    fn counts(m: &ExemplarSet) -> Vec<usize> {
        m.per_class.values().map(Vec::len).filter(|&n| n > 0).collect()
    }

    #[test]
    fn greedy_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (cap, s, expect) in [(4, "AABB", vec![2, 2]), (2, "AAB", vec![1, 1]), (2, "AA", vec![2])] {
            let mut m = ExemplarSet::new(SelectionPolicy::GreedyBalanced, cap);
            for x in stream(s) {
                greedy_balanced_update(&mut m, x, &mut rng);
            }
            assert_eq!(counts(&m), expect, "{s}");
        }
    }

    #[test]
    fn random_selection() {
        let (samples, _) = line(&[0.0, 1.0, 2.0], 0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(select_random_exemplars(&samples, 5, &mut rng).unwrap().len(), 3);
        let a = select_random_exemplars(&samples, 2, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = select_random_exemplars(&samples, 2, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);

        let two = &samples[..2];
        let trials = 10_000;
        let first = (0..trials)
            .filter(|_| select_random_exemplars(two, 1, &mut rng).unwrap()[0].arrival_index == 0)
            .count();
        assert!((first as f64 / trials as f64 - 0.5).abs() < 0.02);
        assert!(select_random_exemplars(&[], 1, &mut rng).is_err());
    }

    #[test]
    fn replay_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut m = ExemplarSet::new(SelectionPolicy::Cluster, 20);
        assert!(matches!(draw_replay(&m, 1, &mut rng), Err(Error::EmptyMemory)));
        m.insert_class(3, vec![Sample::features(vec![1.0], 3, 0)]).unwrap();
        let d = draw_replay(&m, 3, &mut rng).unwrap();
        assert_eq!(d.len(), 3);
        assert!(d.iter().all(|s| s == &m.per_class[&3][0]));

        let mut m = ExemplarSet::new(SelectionPolicy::Cluster, 20);
        for c in 0..2 {
            m.insert_class(c, (0..10).map(|i| Sample::features(vec![i as f64], c, i)).collect())
                .unwrap();
        }
        let d = draw_replay(&m, 16, &mut rng).unwrap();
        assert_eq!(d.len(), 16);
        assert!(d.iter().all(|s| m.iter().any(|e| e == s)));

        let n = 10_000;
        let mut freq = vec![0usize; 20];
        for s in draw_replay(&m, n, &mut rng).unwrap() {
            freq[s.label * 10 + s.arrival_index] += 1;
        }
        let p = 1.0 / 20.0;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        for f in freq {
            assert!((f as f64 - n as f64 * p).abs() < 3.0 * sd + 1.0);
        }
    }

    #[test]
    fn insert_rejects_mislabelled_and_oversized() {
        let mut m = ExemplarSet::new(SelectionPolicy::Herding, 1);
        assert!(m.insert_class(0, vec![Sample::features(vec![0.0], 1, 0)]).is_err());
        let two = vec![Sample::features(vec![0.0], 0, 0), Sample::features(vec![1.0], 0, 1)];
        assert!(m.insert_class(0, two).is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut m = ExemplarSet::new(SelectionPolicy::Cluster, 2);
        m.insert_class(4, vec![Sample::features(vec![0.25, -1.5], 4, 3)]).unwrap();
        let back = ExemplarSet::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
