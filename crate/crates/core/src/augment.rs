//! Stochastic transforms that turn the original batch into the contrastive
//! batch: exemplar positions are flipped, colour-jittered and blurred
//! (images) or perturbed with Gaussian noise (feature vectors).

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Image, Payload, Sample};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentPolicy {
    pub flip_probability: f64,
    /// Multiplicative brightness factor range.
    pub brightness: (f64, f64),
    /// Contrast factor range, applied around the channel mean.
    pub contrast: (f64, f64),
    /// Saturation factor range (blend with luminance); ignored for
    /// single-channel images.
    pub saturation: (f64, f64),
    pub blur_probability: f64,
    pub blur_sigma: (f64, f64),
    /// Standard deviation of additive noise for feature vectors.
    pub feature_noise_sigma: f64,
    /// Optional positive scale range for feature vectors; `(1, 1)` disables it.
    pub feature_scale: (f64, f64),
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        Self {
            flip_probability: 0.5,
            brightness: (0.6, 1.4),
            contrast: (0.6, 1.4),
            saturation: (0.6, 1.4),
            blur_probability: 0.5,
            blur_sigma: (0.1, 2.0),
            feature_noise_sigma: 0.5,
            feature_scale: (1.0, 1.0),
        }
    }
}

impl AugmentPolicy {
    /// A policy that leaves every payload unchanged.
    pub fn identity() -> Self {
        Self {
            flip_probability: 0.0,
            brightness: (1.0, 1.0),
            contrast: (1.0, 1.0),
            saturation: (1.0, 1.0),
            blur_probability: 0.0,
            blur_sigma: (1.0, 1.0),
            feature_noise_sigma: 0.0,
            feature_scale: (1.0, 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob_ok = |p: f64| (0.0..=1.0).contains(&p);
        let range_ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        if !prob_ok(self.flip_probability) || !prob_ok(self.blur_probability) {
            return Err(Error::Config("augmentation probabilities must lie in [0, 1]".into()));
        }
        for (name, r) in [
            ("brightness", self.brightness),
            ("contrast", self.contrast),
            ("saturation", self.saturation),
            ("blur_sigma", self.blur_sigma),
            ("feature_scale", self.feature_scale),
        ] {
            if !range_ok(r) || r.0 < 0.0 {
                return Err(Error::Config(format!("bad {name} range {r:?}")));
            }
        }
        if self.blur_probability > 0.0 && self.blur_sigma.0 <= 0.0 {
            return Err(Error::Config("blur sigma must be positive".into()));
        }
        if !(self.feature_noise_sigma >= 0.0) || self.feature_scale.0 <= 0.0 {
            return Err(Error::Config("feature noise must be >= 0 and scale > 0".into()));
        }
        Ok(())
    }
}

fn draw<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

pub fn flip_horizontal(img: &Image) -> Image {
    let mut out = img.clone();
    for r in 0..img.height {
        for c in 0..img.width {
            for ch in 0..img.channels {
                let dst = out.index(r, c, ch);
                out.data[dst] = img.get(r, img.width - 1 - c, ch);
            }
        }
    }
    out
}

/// Normalised 1-D Gaussian taps for offsets `-r..=r`, `r = ceil(3σ)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

/// Symmetric (edge-repeating) reflection of an out-of-range index.
pub fn reflect_index(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m >= n { period - 1 - m } else { m }) as usize
}

/// Separable Gaussian blur with reflective boundaries.
pub fn gaussian_blur(img: &Image, sigma: f64) -> Image {
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as i64;
    let mut tmp = img.clone();
    for r in 0..img.height {
        for c in 0..img.width {
            for ch in 0..img.channels {
                let acc: f64 = kernel
                    .iter()
                    .enumerate()
                    .map(|(t, w)| w * img.get(r, reflect_index(c as i64 + t as i64 - radius, img.width), ch))
                    .sum();
                let i = tmp.index(r, c, ch);
                tmp.data[i] = acc;
            }
        }
    }
    let mut out = tmp.clone();
    for r in 0..img.height {
        for c in 0..img.width {
            for ch in 0..img.channels {
                let acc: f64 = kernel
                    .iter()
                    .enumerate()
                    .map(|(t, w)| w * tmp.get(reflect_index(r as i64 + t as i64 - radius, img.height), c, ch))
                    .sum();
                let i = out.index(r, c, ch);
                out.data[i] = acc;
            }
        }
    }
    out
}

fn jitter_colour<R: Rng + ?Sized>(img: &mut Image, policy: &AugmentPolicy, rng: &mut R) {
    let pixels = img.height * img.width;
    if pixels == 0 {
        return;
    }
    for ch in 0..img.channels {
        let brightness = draw(rng, policy.brightness);
        let contrast = draw(rng, policy.contrast);
        if brightness != 1.0 {
            for p in 0..pixels {
                img.data[p * img.channels + ch] *= brightness;
            }
        }
        if contrast != 1.0 {
            let mean = (0..pixels).map(|p| img.data[p * img.channels + ch]).sum::<f64>() / pixels as f64;
            for p in 0..pixels {
                let v = &mut img.data[p * img.channels + ch];
                *v = (*v - mean) * contrast + mean;
            }
        }
    }
    if img.channels == 3 {
        let saturation = draw(rng, policy.saturation);
        if saturation != 1.0 {
            for px in img.data.chunks_exact_mut(3) {
                let luma = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
                px.iter_mut().for_each(|v| *v = luma + (*v - luma) * saturation);
            }
        }
    }
    img.data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
}

/// Random flip, colour jitter and blur; output has the input's shape and
/// stays in `[0, 1]`.
pub fn augment_image<R: Rng + ?Sized>(img: &Image, policy: &AugmentPolicy, rng: &mut R) -> Image {
    let mut out = if rng.random::<f64>() < policy.flip_probability {
        flip_horizontal(img)
    } else {
        img.clone()
    };
    jitter_colour(&mut out, policy, rng);
    if rng.random::<f64>() < policy.blur_probability {
        let sigma = draw(rng, policy.blur_sigma);
        out = gaussian_blur(&out, sigma);
        out.data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    }
    out
}

/// Additive isotropic Gaussian noise, then an optional positive rescale.
pub fn augment_features<R: Rng + ?Sized>(v: &[f64], policy: &AugmentPolicy, rng: &mut R) -> Vec<f64> {
    let sigma = policy.feature_noise_sigma;
    let mut out: Vec<f64> = if sigma > 0.0 {
        v.iter().map(|x| x + sigma * rng.sample::<f64, _>(StandardNormal)).collect()
    } else {
        v.to_vec()
    };
    let scale = draw(rng, policy.feature_scale);
    if scale != 1.0 {
        out.iter_mut().for_each(|x| *x *= scale);
    }
    out
}

pub fn augment_payload<R: Rng + ?Sized>(payload: &Payload, policy: &AugmentPolicy, rng: &mut R) -> Payload {
    match payload {
        Payload::Features(v) => Payload::Features(augment_features(v, policy, rng)),
        Payload::Image(img) => Payload::Image(augment_image(img, policy, rng)),
    }
}

/// Copy of `batch` with the masked (exemplar) positions augmented. Labels,
/// arrival indices and order are untouched.
pub fn make_contrastive_batch<R: Rng + ?Sized>(
    batch: &[Sample],
    exemplar_mask: &[bool],
    policy: &AugmentPolicy,
    rng: &mut R,
) -> Result<Vec<Sample>> {
    if batch.len() != exemplar_mask.len() {
        return Err(Error::Shape(format!(
            "mask of length {} for a batch of {}",
            exemplar_mask.len(),
            batch.len()
        )));
    }
    Ok(batch
        .iter()
        .zip(exemplar_mask)
        .map(|(s, &is_exemplar)| {
            if is_exemplar {
                Sample {
                    payload: augment_payload(&s.payload, policy, rng),
                    ..s.clone()
                }
            } else {
                s.clone()
            }
        })
        .collect())
}
