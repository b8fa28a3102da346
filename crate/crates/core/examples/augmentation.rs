//! Image augmentation and contrastive-batch construction: only exemplar
//! positions of a balanced batch are perturbed.
//!
//! `cargo run --example augmentation`

use online_cl::augment::{augment_image, gaussian_blur, make_contrastive_batch, AugmentPolicy};
use online_cl::data::{Image, Payload, Sample};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn checkerboard(size: usize) -> Image {
    let mut img = Image::zeros(size, size, 3);
    for r in 0..size {
        for c in 0..size {
            let v = if (r / 2 + c / 2) % 2 == 0 { 0.9 } else { 0.1 };
            for ch in 0..3 {
                let i = img.index(r, c, ch);
                img.data[i] = v * (1.0 - 0.2 * ch as f64);
            }
        }
    }
    img
}

fn stats(img: &Image) -> (f64, f64, f64) {
    let n = img.data.len() as f64;
    let mean = img.data.iter().sum::<f64>() / n;
    let (lo, hi) = img.data.iter().fold((1.0f64, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    (mean, lo, hi)
}

fn main() {
    let img = checkerboard(8);
    let policy = AugmentPolicy::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let (m, lo, hi) = stats(&img);
    println!("original      mean {m:.3}, range [{lo:.2}, {hi:.2}]");
    let blurred = gaussian_blur(&img, 1.5);
    let (m, lo, hi) = stats(&blurred);
    println!("blur sigma 1.5 mean {m:.3}, range [{lo:.2}, {hi:.2}]");
    for i in 0..3 {
        let (m, lo, hi) = stats(&augment_image(&img, &policy, &mut rng));
        println!("augmented #{i}  mean {m:.3}, range [{lo:.2}, {hi:.2}]");
    }

    // new, exemplar, new, exemplar
    let batch: Vec<Sample> = (0..4)
        .map(|i| Sample {
            payload: Payload::Image(img.clone()),
            label: i % 2,
            arrival_index: i,
        })
        .collect();
    let mask = [false, true, false, true];
    let contrastive = make_contrastive_batch(&batch, &mask, &policy, &mut rng).unwrap();
    for (i, (a, b)) in batch.iter().zip(&contrastive).enumerate() {
        let changed = a.payload != b.payload;
        println!("position {i} ({}): changed = {changed}", if mask[i] { "exemplar" } else { "new" });
    }
}
