//! Writes a small synthetic image dataset in IDX format, ingests it back and
//! runs the proposed learner on raw pixels with image augmentation.
//!
//! `cargo run --release --example idx_image_stream`

use online_cl::data::{ingest_idx_images, write_idx_images, Image};
use online_cl::eval::Averaging;
use online_cl::experiment::run_online;
use online_cl::learner::{LearnerConfig, Method};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SIZE: usize = 8;

// Class c is a bright bar at row or column c % 4, with pixel noise.
fn render(class: u8, rng: &mut ChaCha8Rng) -> Image {
    let mut img = Image::zeros(SIZE, SIZE, 1);
    let line = 2 * (class as usize % 4);
    for r in 0..SIZE {
        for c in 0..SIZE {
            let on = if class < 4 { r / 2 == line / 2 } else { c / 2 == line / 2 };
            let base = if on { 0.85 } else { 0.15 };
            let i = img.index(r, c, 0);
            img.data[i] = (base + rng.random_range(-0.15..0.15f64)).clamp(0.0, 1.0);
        }
    }
    img
}

fn main() -> online_cl::Result<()> {
    let dir = tempfile_dir();
    let (images, labels) = (dir.join("train-images.idx"), dir.join("train-labels.idx"));
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let data: Vec<(Image, u8)> = (0..8u8)
        .flat_map(|c| (0..60).map(move |_| c))
        .map(|c| (render(c, &mut rng), c))
        .collect();
    write_idx_images(&images, &labels, &data)?;
    println!("wrote {} images to {}", data.len(), dir.display());

    let partition = ingest_idx_images(&images, &labels)?.with_test_split(0.25, 0)?;
    println!("ingested {} classes, dim {:?}", partition.classes().len(), partition.dim());

    for method in [Method::Ours, Method::Finetune] {
        let mut lc = LearnerConfig::new(method, 0);
        lc.batch_size = 16;
        lc.budget = 10;
        lc.loss.learning_rate = 0.05;
        let run = run_online(&partition, 2, 2, lc, &[1], Averaging::Micro, true, |_, _| Ok(()))?;
        let m = &run.metrics[0];
        println!("{method:10} per step {:.3?}  Avg {:.3}", m.per_step_accuracy, m.avg);
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("ocl-idx-{}", std::process::id()));
    std::fs::create_dir_all(&d).expect("create temp dir");
    d
}
