//! Samples, task schedules and class-incremental streams.
//!
//! A [`StreamPartition`] holds the per-class training pools and held-out
//! test sets. Per-task training sequences `D^0..D^N` are derived from it for
//! a given [`TaskSchedule`] with [`StreamPartition::task_streams`], which
//! assigns arrival indices in stream order.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ClassId = usize;

/// Raster image stored in height × width × channel order, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::Shape(format!(
                "image {height}x{width}x{channels} needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, ch: usize) -> usize {
        (row * self.width + col) * self.channels + ch
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.data[self.index(row, col, ch)]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    Features(Vec<f64>),
    Image(Image),
}

impl Payload {
    /// Flat view used as model input (images are flattened row-major, HWC).
    pub fn values(&self) -> &[f64] {
        match self {
            Payload::Features(v) => v,
            Payload::Image(img) => &img.data,
        }
    }

    pub fn dim(&self) -> usize {
        self.values().len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub payload: Payload,
    pub label: ClassId,
    pub arrival_index: usize,
}

impl Sample {
    pub fn features(values: Vec<f64>, label: ClassId, arrival_index: usize) -> Self {
        Self {
            payload: Payload::Features(values),
            label,
            arrival_index,
        }
    }
}

/// Ordered partition of classes into an initial task and incremental steps.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSchedule {
    pub initial_classes: Vec<ClassId>,
    pub steps: Vec<Vec<ClassId>>,
    pub seed: u64,
}

impl TaskSchedule {
    /// Shuffles `class_ids` with `seed`, assigns the first `initial_count` to
    /// the initial task and chunks the rest into steps of `step_size`. A
    /// remainder that does not fill a step becomes a final smaller step.
    pub fn build(
        class_ids: &[ClassId],
        initial_count: usize,
        step_size: usize,
        seed: u64,
    ) -> Result<Self> {
        if initial_count == 0 || step_size == 0 {
            return Err(Error::InvalidSchedule(
                "initial count and step size must be at least 1".into(),
            ));
        }
        let unique: BTreeSet<_> = class_ids.iter().collect();
        if unique.len() != class_ids.len() {
            return Err(Error::InvalidSchedule("duplicate class ids".into()));
        }
        if initial_count + step_size > class_ids.len() {
            return Err(Error::InvalidSchedule(format!(
                "{} classes cannot fill an initial task of {} plus a step of {}",
                class_ids.len(),
                initial_count,
                step_size
            )));
        }
        let mut order = class_ids.to_vec();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let rest = order.split_off(initial_count);
        let steps = rest.chunks(step_size).map(<[_]>::to_vec).collect();
        Ok(Self {
            initial_classes: order,
            steps,
            seed,
        })
    }

    /// All task class lists, initial task first.
    pub fn tasks(&self) -> impl Iterator<Item = &[ClassId]> {
        std::iter::once(self.initial_classes.as_slice()).chain(self.steps.iter().map(Vec::as_slice))
    }

    pub fn num_tasks(&self) -> usize {
        1 + self.steps.len()
    }

    pub fn task_of(&self, class: ClassId) -> Option<usize> {
        self.tasks().position(|t| t.contains(&class))
    }

    /// Classes seen after task `task` has been learned.
    pub fn seen_classes(&self, task: usize) -> Vec<ClassId> {
        self.tasks().take(task + 1).flatten().copied().collect()
    }
}

/// Per-class training pools and held-out test sets.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StreamPartition {
    pub train: BTreeMap<ClassId, Vec<Sample>>,
    pub test: BTreeMap<ClassId, Vec<Sample>>,
}

impl StreamPartition {
    /// Pools every sample for training; call [`Self::with_test_split`] to
    /// hold out test data.
    pub fn from_samples(samples: Vec<Sample>) -> Self {
        let mut train: BTreeMap<ClassId, Vec<Sample>> = BTreeMap::new();
        for s in samples {
            train.entry(s.label).or_default().push(s);
        }
        Self {
            train,
            test: BTreeMap::new(),
        }
    }

    pub fn classes(&self) -> Vec<ClassId> {
        self.train
            .keys()
            .chain(self.test.keys())
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Training count n_i per class.
    pub fn counts(&self) -> BTreeMap<ClassId, usize> {
        self.train.iter().map(|(&c, v)| (c, v.len())).collect()
    }

    pub fn dim(&self) -> Option<usize> {
        self.train
            .values()
            .chain(self.test.values())
            .flat_map(|v| v.first())
            .map(|s| s.payload.dim())
            .next()
    }

    /// Moves `round(fraction * n)` samples of every class into the test
    /// set, clamped so each class keeps at least one training and one test
    /// sample. Classes with fewer than two samples are rejected.
    pub fn with_test_split(mut self, fraction: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::InvalidDataset(format!(
                "test fraction {fraction} outside [0, 1)"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (&class, pool) in self.train.iter_mut() {
            let n = pool.len();
            if n < 2 {
                return Err(Error::InvalidDataset(format!(
                    "class {class} has {n} sample(s), need at least 2"
                )));
            }
            let n_test = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
            pool.shuffle(&mut rng);
            let mut held = pool.split_off(n - n_test);
            for (i, s) in held.iter_mut().enumerate() {
                s.arrival_index = i;
            }
            self.test.entry(class).or_default().extend(held);
        }
        Ok(self)
    }

    /// Training sequences `D^0..D^N` for `schedule`. Each task's samples are
    /// shuffled with `seed` and receive arrival indices `0..n_i`.
    pub fn task_streams(&self, schedule: &TaskSchedule, seed: u64) -> Result<Vec<Vec<Sample>>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5354_5245_414d);
        schedule
            .tasks()
            .enumerate()
            .map(|(k, classes)| {
                let mut stream = Vec::new();
                for c in classes {
                    let pool = self.train.get(c).ok_or_else(|| {
                        Error::InvalidSchedule(format!("class {c} has no training data"))
                    })?;
                    stream.extend(pool.iter().cloned());
                }
                if stream.is_empty() {
                    return Err(Error::InvalidTask(format!("task {k} is empty")));
                }
                stream.shuffle(&mut rng);
                for (i, s) in stream.iter_mut().enumerate() {
                    s.arrival_index = i;
                }
                Ok(stream)
            })
            .collect()
    }

    /// Test samples of the given classes, in class order.
    pub fn test_for(&self, classes: &[ClassId]) -> Vec<Sample> {
        let mut sorted = classes.to_vec();
        sorted.sort_unstable();
        sorted
            .iter()
            .filter_map(|c| self.test.get(c))
            .flatten()
            .cloned()
            .collect()
    }
}

/// Synthetic Gaussian-blob stream description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub n_classes: usize,
    pub dim: usize,
    /// Total (train + test) samples per class.
    pub per_class_counts: Vec<usize>,
    /// Standard deviation of each isotropic component.
    pub spread: f64,
    /// Sub-cluster means per class; more than one emulates high intra-class
    /// variation.
    pub modes_per_class: usize,
    /// Half-width of the cube the means are drawn from.
    pub box_half_width: f64,
    /// Minimum pairwise distance between any two component means.
    pub min_separation: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl BlobSpec {
    pub fn new(n_classes: usize, dim: usize, per_class_counts: Vec<usize>, spread: f64, seed: u64) -> Self {
        Self {
            n_classes,
            dim,
            per_class_counts,
            spread,
            modes_per_class: 1,
            box_half_width: 4.0,
            min_separation: 2.0,
            test_fraction: 0.2,
            seed,
        }
    }
}

/// Draws one imbalanced count per class uniformly from `[lo, hi]`.
pub fn imbalanced_counts(n_classes: usize, lo: usize, hi: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x434f_554e_54);
    (0..n_classes).map(|_| rng.random_range(lo..=hi)).collect()
}

fn place_means(spec: &BlobSpec, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    const MAX_ATTEMPTS: usize = 100_000;
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut attempts = 0;
    while means.len() < count {
        attempts += 1;
        if attempts > MAX_ATTEMPTS {
            return Err(Error::InvalidDataset(format!(
                "could not place {count} means with separation {} in a box of half-width {}",
                spec.min_separation, spec.box_half_width
            )));
        }
        let candidate: Vec<f64> = (0..spec.dim)
            .map(|_| rng.random_range(-spec.box_half_width..=spec.box_half_width))
            .collect();
        let far_enough = means.iter().all(|m| {
            let d2: f64 = m.iter().zip(&candidate).map(|(a, b)| (a - b).powi(2)).sum();
            d2.sqrt() >= spec.min_separation
        });
        if far_enough {
            means.push(candidate);
        }
    }
    Ok(means)
}

/// Generates a labelled Gaussian-blob partition. Class `c` is labelled `c`.
/// Each class mixes `modes_per_class` components with random unequal
/// weights; counts are honoured exactly and split into train/test.
pub fn generate_blob_stream(spec: &BlobSpec) -> Result<StreamPartition> {
    if spec.per_class_counts.len() != spec.n_classes {
        return Err(Error::InvalidDataset(format!(
            "{} counts given for {} classes",
            spec.per_class_counts.len(),
            spec.n_classes
        )));
    }
    if let Some((c, &n)) = spec.per_class_counts.iter().enumerate().find(|(_, &n)| n < 2) {
        return Err(Error::InvalidDataset(format!(
            "class {c} has count {n}, need at least 2"
        )));
    }
    if spec.dim == 0 || spec.modes_per_class == 0 {
        return Err(Error::InvalidDataset("dim and modes must be positive".into()));
    }
    if !(spec.spread >= 0.0 && spec.spread.is_finite()) {
        return Err(Error::InvalidDataset(format!("bad spread {}", spec.spread)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let means = place_means(spec, spec.n_classes * spec.modes_per_class, &mut rng)?;

    let mut samples = Vec::new();
    for (class, &count) in spec.per_class_counts.iter().enumerate() {
        let modes = &means[class * spec.modes_per_class..(class + 1) * spec.modes_per_class];
        let weights: Vec<f64> = (0..modes.len()).map(|_| rng.random_range(0.5..1.5)).collect();
        let total: f64 = weights.iter().sum();
        for _ in 0..count {
            let mut u = rng.random::<f64>() * total;
            let mut mode = modes.len() - 1;
            for (m, w) in weights.iter().enumerate() {
                if u < *w {
                    mode = m;
                    break;
                }
                u -= w;
            }
            let x = modes[mode]
                .iter()
                .map(|&mu| mu + spec.spread * rng.sample::<f64, _>(StandardNormal))
                .collect();
            samples.push(Sample::features(x, class, samples.len()));
        }
    }
    StreamPartition::from_samples(samples).with_test_split(spec.test_fraction, spec.seed)
}

/// Reads `label,f1,...,fd` rows. All rows go to the training pool in file
/// order; arrival indices follow row order.
pub fn ingest_feature_csv(path: impl AsRef<Path>) -> Result<StreamPartition> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse {
            path: path.into(),
            line: 0,
            msg: e.to_string(),
        })?;
    let parse_err = |line: u64, msg: String| Error::Parse {
        path: path.into(),
        line,
        msg,
    };
    let mut samples = Vec::new();
    let mut dim = None;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() < 2 {
            return Err(parse_err(line, "row needs a label and at least one feature".into()));
        }
        match dim {
            None => dim = Some(record.len() - 1),
            Some(d) if d != record.len() - 1 => {
                return Err(parse_err(
                    line,
                    format!("expected {} features, found {}", d, record.len() - 1),
                ))
            }
            _ => {}
        }
        let label: ClassId = record[0]
            .parse()
            .map_err(|_| parse_err(line, format!("bad label {:?}", &record[0])))?;
        let values = record
            .iter()
            .skip(1)
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(line, format!("non-numeric field {f:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        samples.push(Sample::features(values, label, samples.len()));
    }
    if samples.is_empty() {
        return Err(parse_err(1, "empty file".into()));
    }
    Ok(StreamPartition::from_samples(samples))
}

/// Writes samples as `label,f1,...,fd`. Floats use Rust's shortest
/// round-trip formatting, so re-ingesting reproduces identical payloads.
pub fn export_feature_csv<'a>(
    path: impl AsRef<Path>,
    samples: impl IntoIterator<Item = &'a Sample>,
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for s in samples {
        write!(out, "{}", s.label)?;
        for v in s.payload.values() {
            write!(out, ",{v}")?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

const IDX_UBYTE: u8 = 0x08;

fn read_idx(path: &Path) -> Result<(Vec<usize>, Vec<u8>)> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 4 {
        return Err(Error::Format(format!("{}: truncated header", path.display())));
    }
    if bytes[0] != 0 || bytes[1] != 0 || bytes[2] != IDX_UBYTE {
        return Err(Error::Format(format!(
            "{}: bad magic {:02x}{:02x}{:02x}{:02x}",
            path.display(),
            bytes[0],
            bytes[1],
            bytes[2],
            bytes[3]
        )));
    }
    let ndim = bytes[3] as usize;
    let header = 4 + 4 * ndim;
    if ndim == 0 || bytes.len() < header {
        return Err(Error::Format(format!("{}: truncated header", path.display())));
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let expected: usize = dims.iter().product();
    let body = &bytes[header..];
    if body.len() != expected {
        return Err(Error::Format(format!(
            "{}: expected {} data bytes, found {}",
            path.display(),
            expected,
            body.len()
        )));
    }
    Ok((dims, body.to_vec()))
}

/// Reads an IDX image file (`N×H×W` or `N×H×W×C`, unsigned bytes) and its
/// label file (`N`). Pixel values are scaled to `[0, 1]`.
pub fn ingest_idx_images(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<StreamPartition> {
    let (idims, pixels) = read_idx(images_path.as_ref())?;
    let (ldims, labels) = read_idx(labels_path.as_ref())?;
    let (n, h, w, c) = match idims.as_slice() {
        [n, h, w] => (*n, *h, *w, 1),
        [n, h, w, c] => (*n, *h, *w, *c),
        _ => {
            return Err(Error::Format(format!(
                "image file must have 3 or 4 dimensions, found {}",
                idims.len()
            )))
        }
    };
    if ldims.len() != 1 {
        return Err(Error::Format("label file must be one-dimensional".into()));
    }
    if ldims[0] != n {
        return Err(Error::Format(format!(
            "{n} images but {} labels",
            ldims[0]
        )));
    }
    let per = h * w * c;
    let samples = pixels
        .chunks_exact(per.max(1))
        .take(n)
        .zip(&labels)
        .enumerate()
        .map(|(i, (px, &label))| Sample {
            payload: Payload::Image(Image {
                height: h,
                width: w,
                channels: c,
                data: px.iter().map(|&b| f64::from(b) / 255.0).collect(),
            }),
            label: label as ClassId,
            arrival_index: i,
        })
        .collect();
    Ok(StreamPartition::from_samples(samples))
}

/// Writes images and labels as IDX files. Pixel values are quantised to
/// bytes with `round(255 * v)`.
pub fn write_idx_images(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    images: &[(Image, u8)],
) -> Result<()> {
    let (h, w, c) = images
        .first()
        .map_or((0, 0, 1), |(img, _)| (img.height, img.width, img.channels));
    let mut img_out = BufWriter::new(File::create(images_path)?);
    let dims: Vec<u32> = if c == 1 {
        vec![images.len() as u32, h as u32, w as u32]
    } else {
        vec![images.len() as u32, h as u32, w as u32, c as u32]
    };
    img_out.write_all(&[0, 0, IDX_UBYTE, dims.len() as u8])?;
    for d in &dims {
        img_out.write_all(&d.to_be_bytes())?;
    }
    for (img, _) in images {
        if (img.height, img.width, img.channels) != (h, w, c) {
            return Err(Error::Shape("images differ in shape".into()));
        }
        let bytes: Vec<u8> = img
            .data
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        img_out.write_all(&bytes)?;
    }
    img_out.flush()?;

    let mut lbl_out = BufWriter::new(File::create(labels_path)?);
    lbl_out.write_all(&[0, 0, IDX_UBYTE, 1])?;
    lbl_out.write_all(&(images.len() as u32).to_be_bytes())?;
    lbl_out.write_all(&images.iter().map(|(_, l)| *l).collect::<Vec<_>>())?;
    lbl_out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_examples() {
        let ids: Vec<_> = (0..100).collect();
        let s = TaskSchedule::build(&ids, 20, 20, 1).unwrap();
        assert_eq!(s.steps.len(), 4);
        assert!(s.steps.iter().all(|t| t.len() == 20));

        let s = TaskSchedule::build(&[0, 1, 2], 2, 1, 0).unwrap();
        assert_eq!(s.steps.len(), 1);
        assert_eq!(s.steps[0].len(), 1);

        let ids: Vec<_> = (0..10).collect();
        let a = TaskSchedule::build(&ids, 2, 4, 7).unwrap();
        let b = TaskSchedule::build(&ids, 2, 4, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.steps.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 4]);
    }

    #[test]
    fn schedule_remainder_forms_short_step() {
        let ids: Vec<_> = (0..7).collect();
        let s = TaskSchedule::build(&ids, 2, 2, 3).unwrap();
        assert_eq!(s.steps.iter().map(Vec::len).collect::<Vec<_>>(), vec![2, 2, 1]);
    }

    #[test]
    fn schedule_errors() {
        assert!(matches!(
            TaskSchedule::build(&[0, 1], 2, 1, 0),
            Err(Error::InvalidSchedule(_))
        ));
        assert!(TaskSchedule::build(&[0, 1, 2], 0, 1, 0).is_err());
        assert!(TaskSchedule::build(&[0, 1, 2], 1, 0, 0).is_err());
    }

    #[test]
    fn blob_counts_honoured() {
        let spec = BlobSpec::new(2, 3, vec![91, 1199], 0.5, 4);
        let p = generate_blob_stream(&spec).unwrap();
        for (c, n) in [(0, 91), (1, 1199)] {
            assert_eq!(p.train[&c].len() + p.test[&c].len(), n);
        }
    }

    #[test]
    fn blob_zero_spread_is_degenerate() {
        let spec = BlobSpec::new(3, 4, vec![5, 6, 7], 0.0, 2);
        let p = generate_blob_stream(&spec).unwrap();
        for c in 0..3 {
            let all: Vec<_> = p.train[&c].iter().chain(&p.test[&c]).collect();
            assert!(all.iter().all(|s| s.payload == all[0].payload));
        }
    }

    #[test]
    fn blob_rejects_tiny_class() {
        let spec = BlobSpec::new(2, 2, vec![5, 1], 0.1, 0);
        assert!(matches!(generate_blob_stream(&spec), Err(Error::InvalidDataset(_))));
    }

    #[test]
    fn blob_nearest_centroid_oracle() {
        let mut spec = BlobSpec::new(4, 5, vec![200; 4], 0.1, 11);
        spec.modes_per_class = 2;
        let p = generate_blob_stream(&spec).unwrap();
        // oracle: nearest centroid over every training sub-cluster, where
        // sub-clusters are recovered by 2-means seeded at the extreme points.
        let mut centroids: Vec<(Vec<f64>, ClassId)> = Vec::new();
        for (&c, pool) in &p.train {
            let pts: Vec<&[f64]> = pool.iter().map(|s| s.payload.values()).collect();
            let a = pts[0];
            let far = pts
                .iter()
                .max_by(|x, y| dist(x, a).total_cmp(&dist(y, a)))
                .unwrap();
            let mut cents = [a.to_vec(), far.to_vec()];
            for _ in 0..10 {
                let mut sums = [vec![0.0; 5], vec![0.0; 5]];
                let mut ns = [0usize; 2];
                for p in &pts {
                    let k = usize::from(dist(p, &cents[1]) < dist(p, &cents[0]));
                    ns[k] += 1;
                    sums[k].iter_mut().zip(p.iter()).for_each(|(s, v)| *s += v);
                }
                for k in 0..2 {
                    if ns[k] > 0 {
                        cents[k] = sums[k].iter().map(|s| s / ns[k] as f64).collect();
                    }
                }
            }
            centroids.extend(cents.into_iter().map(|m| (m, c)));
        }
        let test: Vec<_> = p.test.values().flatten().collect();
        let correct = test
            .iter()
            .filter(|s| {
                let x = s.payload.values();
                let best = centroids
                    .iter()
                    .min_by(|a, b| dist(&a.0, x).total_cmp(&dist(&b.0, x)))
                    .unwrap();
                best.1 == s.label
            })
            .count();
        assert!(correct as f64 / test.len() as f64 >= 0.99);
    }

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn test_split_is_disjoint_and_keeps_both_sides() {
        let spec = BlobSpec::new(3, 2, vec![2, 10, 50], 1.0, 5);
        let p = generate_blob_stream(&spec).unwrap();
        for c in 0..3 {
            assert!(!p.train[&c].is_empty());
            assert!(!p.test[&c].is_empty());
            for t in &p.test[&c] {
                assert!(!p.train[&c].iter().any(|s| s.payload == t.payload));
            }
        }
        assert_eq!(p.test[&2].len(), 10);
    }

    #[test]
    fn task_streams_deliver_each_sample_once() {
        let spec = BlobSpec::new(5, 2, vec![10, 12, 14, 16, 18], 1.0, 5);
        let p = generate_blob_stream(&spec).unwrap();
        let sched = TaskSchedule::build(&p.classes(), 2, 2, 9).unwrap();
        let streams = p.task_streams(&sched, 9).unwrap();
        assert_eq!(streams.len(), 3);
        for (k, stream) in streams.iter().enumerate() {
            let idx: Vec<_> = stream.iter().map(|s| s.arrival_index).collect();
            assert_eq!(idx, (0..stream.len()).collect::<Vec<_>>());
            let classes: Vec<_> = sched.tasks().nth(k).unwrap().to_vec();
            let expected: usize = classes.iter().map(|c| p.train[c].len()).sum();
            assert_eq!(stream.len(), expected);
            assert!(stream.iter().all(|s| classes.contains(&s.label)));
        }
    }

    #[test]
    fn csv_parse_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ok.csv");
        std::fs::write(&path, "0,1.0,2.0\n1,3.5,-1\n0,0,0\n").unwrap();
        let p = ingest_feature_csv(&path).unwrap();
        assert_eq!(p.train.values().map(Vec::len).sum::<usize>(), 3);
        assert_eq!(p.counts()[&0], 2);

        let bad = dir.path().join("ragged.csv");
        std::fs::write(&bad, "0,1.0,2.0\n1,3.5\n").unwrap();
        match ingest_feature_csv(&bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }

        let nonnum = dir.path().join("nonnum.csv");
        std::fs::write(&nonnum, "0,1.0\n1,abc\n").unwrap();
        assert!(matches!(ingest_feature_csv(&nonnum), Err(Error::Parse { line: 2, .. })));

        let empty = dir.path().join("empty.csv");
        std::fs::write(&empty, "").unwrap();
        assert!(matches!(ingest_feature_csv(&empty), Err(Error::Parse { .. })));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let spec = BlobSpec::new(3, 4, vec![6, 6, 6], 1.3, 8);
        let p = generate_blob_stream(&spec).unwrap();
        let samples: Vec<_> = p.train.values().flatten().cloned().collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.csv");
        export_feature_csv(&path, &samples).unwrap();
        let back = ingest_feature_csv(&path).unwrap();
        let back: Vec<_> = back.train.values().flatten().collect();
        for (a, b) in samples.iter().zip(back) {
            assert_eq!(a.payload, b.payload);
            assert_eq!(a.label, b.label);
        }
    }

    #[test]
    fn idx_read_write() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("img.idx"), dir.path().join("lbl.idx"));
        let mut images: Vec<(Image, u8)> = (0..10)
            .map(|i| {
                let mut img = Image::zeros(28, 28, 1);
                img.data[i * 3] = 1.0;
                (img, (i % 3) as u8)
            })
            .collect();
        images[0].0 = Image::zeros(28, 28, 1);
        write_idx_images(&ip, &lp, &images).unwrap();
        let p = ingest_idx_images(&ip, &lp).unwrap();
        let all: Vec<_> = p.train.values().flatten().collect();
        assert_eq!(all.len(), 10);
        for s in &all {
            match &s.payload {
                Payload::Image(img) => assert_eq!((img.height, img.width, img.channels), (28, 28, 1)),
                _ => panic!("expected image"),
            }
        }
        let zero = all.iter().find(|s| s.arrival_index == 0).unwrap();
        assert!(zero.payload.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn idx_errors() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("img.idx"), dir.path().join("lbl.idx"));
        let images: Vec<(Image, u8)> = (0..4).map(|_| (Image::zeros(2, 2, 1), 0)).collect();
        write_idx_images(&ip, &lp, &images).unwrap();

        let short = dir.path().join("short.idx");
        write_idx_images(dir.path().join("img3.idx"), &short, &images[..3]).unwrap();
        assert!(matches!(ingest_idx_images(&ip, &short), Err(Error::Format(_))));

        let mut bytes = std::fs::read(&ip).unwrap();
        bytes[2] = 0x0d;
        let bad = dir.path().join("bad.idx");
        std::fs::write(&bad, &bytes).unwrap();
        assert!(matches!(ingest_idx_images(&bad, &lp), Err(Error::Format(_))));

        let bytes = std::fs::read(&ip).unwrap();
        std::fs::write(&bad, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(ingest_idx_images(&bad, &lp), Err(Error::Format(_))));
    }
}
