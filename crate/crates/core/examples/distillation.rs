//! Softened-softmax distillation, cross-entropy and their mix on a single
//! row of logits, with a finite-difference check of the gradient.
//!
//! `cargo run --example distillation`

use online_cl::nn::{
    cross_distillation_grad, cross_distillation_loss, cross_entropy_loss, distillation_loss, softened_entropy,
    softened_softmax, LossConfig,
};

fn main() -> online_cl::Result<()> {
    let teacher = [2.0, -1.0, 0.5];
    // the student has grown two new heads
    let student = [1.5, -0.5, 0.5, 1.0, -2.0];
    let label = 3;

    for t in [1.0001, 2.0, 4.0] {
        let p = softened_softmax(&teacher, t);
        println!(
            "T = {t:<6} teacher targets {:.3?}  L_D = {:.4} (floor {:.4})",
            p,
            distillation_loss(&student, &teacher, teacher.len(), t)?,
            softened_entropy(&teacher, t)
        );
    }
    println!("L_C = {:.4}", cross_entropy_loss(&student, label)?);

    for beta in [0.0, 0.5, 1.0] {
        let cfg = LossConfig { beta, ..LossConfig::default() };
        let g = cross_distillation_grad(&student, &teacher, label, &cfg)?;
        let h = 1e-6;
        let fd: Vec<f64> = (0..student.len())
            .map(|i| {
                let (mut up, mut down) = (student, student);
                up[i] += h;
                down[i] -= h;
                (cross_distillation_loss(&up, &teacher, label, &cfg).unwrap()
                    - cross_distillation_loss(&down, &teacher, label, &cfg).unwrap())
                    / (2.0 * h)
            })
            .collect();
        let err = g.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!(
            "beta = {beta}: L_CD = {:.4}, grad {:.4?}, max |grad - fd| = {err:.1e}",
            cross_distillation_loss(&student, &teacher, label, &cfg)?,
            g
        );
    }
    Ok(())
}
