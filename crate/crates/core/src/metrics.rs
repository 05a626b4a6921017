//! Image quality and segmentation metrics, and the correlated noise model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, mismatch, Result};
use crate::filter::gaussian_blur;
use crate::grid::{Image, Mask};

/// Threshold turning soft predictions into binary masks (`value ≥ 0.5`).
pub const BINARY_THRESHOLD: f64 = 0.5;

/// How the PSNR ratio is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PsnrMode {
    /// `10·log₁₀(peak² / mean squared error)`.
    #[default]
    Standard,
    /// `10·log₁₀(peak / Σ|f − g|²)`, summing over pixels.
    Literal,
}

fn check_same(f: &Image, g: &Image) -> Result<()> {
    if f.same_shape(g) {
        Ok(())
    } else {
        Err(mismatch(
            format!("{}x{}", f.width(), f.height()),
            format!("{}x{}", g.width(), g.height()),
        ))
    }
}

/// Peak signal-to-noise ratio in dB; `f64::INFINITY` for identical images.
pub fn psnr(f: &Image, g: &Image, peak: f64) -> Result<f64> {
    psnr_with_mode(f, g, peak, PsnrMode::Standard)
}

pub fn psnr_with_mode(f: &Image, g: &Image, peak: f64, mode: PsnrMode) -> Result<f64> {
    check_same(f, g)?;
    let sse: f64 = f
        .data()
        .iter()
        .zip(g.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if sse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(match mode {
        PsnrMode::Standard => 10.0 * (peak * peak / (sse / f.len() as f64)).log10(),
        PsnrMode::Literal => 10.0 * (peak / sse).log10(),
    })
}

/// Counts of the confusion matrix of a prediction against a ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn new(prediction: &Mask, truth: &Mask) -> Result<Self> {
        if prediction.data().len() != truth.data().len()
            || prediction.width() != truth.width()
            || prediction.height() != truth.height()
        {
            return Err(mismatch(
                format!("{}x{}", truth.width(), truth.height()),
                format!("{}x{}", prediction.width(), prediction.height()),
            ));
        }
        let mut c = Self::default();
        for (&p, &t) in prediction.data().iter().zip(truth.data()) {
            match (p, t) {
                (true, true) => c.tp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// `(2TP + ε) / (2TP + FP + FN + ε)`.
    pub fn dice(&self, eps: f64) -> f64 {
        let tp = self.tp as f64;
        (2.0 * tp + eps) / (2.0 * tp + self.fp as f64 + self.fn_ as f64 + eps)
    }

    /// `(TP + ε) / (TP + FP + ε)`.
    pub fn precision(&self, eps: f64) -> f64 {
        let tp = self.tp as f64;
        (tp + eps) / (tp + self.fp as f64 + eps)
    }
}

/// `value ≥ 0.5`.
pub fn binarize(img: &Image) -> Mask {
    Mask::from_image_fn(img.width(), img.height(), |x, y| {
        img.get(x, y) >= BINARY_THRESHOLD
    })
}

pub fn dice(prediction: &Mask, truth: &Mask, eps: f64) -> Result<f64> {
    Ok(ConfusionCounts::new(prediction, truth)?.dice(eps))
}

pub fn precision(prediction: &Mask, truth: &Mask, eps: f64) -> Result<f64> {
    Ok(ConfusionCounts::new(prediction, truth)?.precision(eps))
}

/// Continuous Dice loss `1 − Σ f·g / (Σ(f + g) + ε)`.
pub fn dice_loss(f: &Image, g: &Image, eps: f64) -> Result<f64> {
    let (overlap, total) = overlap_and_total(f, g)?;
    Ok(1.0 - overlap / (total + eps))
}

/// `1 − 2Σ f·g / (Σ(f + g) + ε)`, which equals `1 − Dice` on binary inputs
/// up to the `ε` terms.
pub fn dice_loss_soft(f: &Image, g: &Image, eps: f64) -> Result<f64> {
    let (overlap, total) = overlap_and_total(f, g)?;
    Ok(1.0 - 2.0 * overlap / (total + eps))
}

fn overlap_and_total(f: &Image, g: &Image) -> Result<(f64, f64)> {
    check_same(f, g)?;
    Ok(f.data()
        .iter()
        .zip(g.data())
        .fold((0.0, 0.0), |(o, t), (a, b)| (o + a * b, t + a + b)))
}

/// Additive correlated noise `K_ρ ∗ n_σ`: white Gaussian noise with standard
/// deviation `sigma` smoothed by a normalised Gaussian of scale `rho`.
/// Deterministic for a given seed.
pub fn correlated_noise(
    width: usize,
    height: usize,
    sigma: f64,
    rho: f64,
    seed: u64,
) -> Result<Image> {
    if !(sigma >= 0.0 && rho >= 0.0 && sigma.is_finite() && rho.is_finite()) {
        return Err(invalid(
            "noise",
            "sigma and rho must be finite and non-negative",
        ));
    }
    if width == 0 || height == 0 {
        return Err(invalid("shape", "noise dimensions must be positive"));
    }
    if sigma == 0.0 {
        return Ok(Image::filled(width, height, 0.0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).map_err(|e| invalid("sigma", e.to_string()))?;
    let white: Vec<f64> = (0..width * height)
        .map(|_| normal.sample(&mut rng))
        .collect();
    Ok(gaussian_blur(&Image::new(width, height, white)?, rho))
}
