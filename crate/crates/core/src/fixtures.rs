//! Synthetic test images: crossing lines with a hole, a spiral, straight
//! ridges, rings and smooth band-limited patterns. All intensities lie in
//! `[0, 1]`.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::grid::{Image, Mask};

/// Gaussian line profile at distance `d` for half-width `w`.
fn profile(d: f64, w: f64) -> f64 {
    (-0.5 * (d / w).powi(2)).exp()
}

fn centre(size: usize) -> f64 {
    0.5 * (size as f64 - 1.0)
}

/// Distance from `(x, y)` to the infinite line through `(cx, cy)` with
/// direction angle `angle`.
fn line_distance(x: f64, y: f64, cx: f64, cy: f64, angle: f64) -> f64 {
    ((x - cx) * angle.sin() - (y - cy) * angle.cos()).abs()
}

/// A bright straight ridge through the image centre.
pub fn ridge(size: usize, angle: f64, width: f64) -> Image {
    let c = centre(size);
    Image::from_fn(size, size, |x, y| {
        profile(line_distance(x as f64, y as f64, c, c, angle), width)
    })
}

/// A bright ring of the given radius around the image centre.
pub fn ring(size: usize, radius: f64, width: f64) -> Image {
    let c = centre(size);
    Image::from_fn(size, size, |x, y| {
        let r = (x as f64 - c).hypot(y as f64 - c);
        profile(r - radius, width)
    })
}

/// An isotropic Gaussian blob of scale `sigma` at `(cx, cy)`.
pub fn gaussian_blob(size: usize, cx: f64, cy: f64, sigma: f64) -> Image {
    Image::from_fn(size, size, |x, y| {
        let r2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
        (-0.5 * r2 / (sigma * sigma)).exp()
    })
}

/// Distance from `(dx, dy)` to the nearest arm of an Archimedean spiral
/// with radial spacing `pitch`, winding clockwise for `handed = 1` and
/// anticlockwise for `-1`.
fn spiral_distance(dx: f64, dy: f64, pitch: f64, handed: f64) -> f64 {
    let r = dx.hypot(dy);
    let phi = (handed * dy.atan2(dx)).rem_euclid(TAU);
    let s = (r - pitch * phi / TAU) / pitch;
    (s - s.round()).abs() * pitch
}

/// A single Archimedean spiral of bright lines with radial spacing `pitch`.
pub fn spiral(size: usize, pitch: f64, width: f64) -> Image {
    let c = centre(size);
    Image::from_fn(size, size, |x, y| {
        profile(
            spiral_distance(x as f64 - c, y as f64 - c, pitch, 1.0),
            width,
        )
    })
}

/// Two spirals of opposite handedness drawn over each other, crossing
/// many times.
pub fn overlapping_spirals(size: usize, pitch: f64, width: f64) -> Image {
    let c = centre(size);
    Image::from_fn(size, size, |x, y| {
        let (dx, dy) = (x as f64 - c, y as f64 - c);
        let d = spiral_distance(dx, dy, pitch, 1.0).min(spiral_distance(dx, dy, pitch, -1.0));
        profile(d, width)
    })
}

/// A smooth random pattern whose spectrum lies below `max_freq` (in
/// radians per pixel), rescaled to `[0, 1]`.
pub fn band_limited(size: usize, max_freq: f64, terms: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f64, f64, f64, f64)> = (0..terms)
        .map(|_| {
            let r = max_freq * rng.gen_range(0.1..1.0);
            let a = rng.gen_range(0.0..TAU);
            (
                r * a.cos(),
                r * a.sin(),
                rng.gen_range(0.0..TAU),
                rng.gen_range(0.2..1.0),
            )
        })
        .collect();
    let img = Image::from_fn(size, size, |x, y| {
        waves
            .iter()
            .map(|&(wx, wy, ph, amp)| amp * (wx * x as f64 + wy * y as f64 + ph).cos())
            .sum()
    });
    normalize(&img)
}

/// Affinely maps an image onto `[0, 1]`; constants map to zero.
pub fn normalize(img: &Image) -> Image {
    let (lo, hi) = img.min_max();
    if hi > lo {
        img.map(|v| (v - lo) / (hi - lo))
    } else {
        img.map(|_| 0.0)
    }
}

/// Two lines crossing at the image centre with a square hole over the
/// crossing.
#[derive(Debug, Clone)]
pub struct CrossingFixture {
    /// Undamaged image.
    pub clean: Image,
    /// Image with the hole set to the background value.
    pub damaged: Image,
    /// `true` inside the hole, i.e. where inpainting may change values.
    pub mask: Mask,
    pub angles: [f64; 2],
    pub line_width: f64,
    pub hole_half: usize,
}

impl CrossingFixture {
    pub fn new(size: usize, angles: [f64; 2], line_width: f64, hole_half: usize) -> Result<Self> {
        if size < 4 * hole_half + 8 {
            return Err(invalid("size", "image too small for the hole"));
        }
        if !(line_width > 0.0) {
            return Err(invalid("line_width", "must be positive"));
        }
        let c = centre(size);
        let clean = Image::from_fn(size, size, |x, y| {
            let (xf, yf) = (x as f64, y as f64);
            angles
                .iter()
                .map(|&a| profile(line_distance(xf, yf, c, c, a), line_width))
                .fold(0.0, f64::max)
        });
        let mask = Mask::from_image_fn(size, size, |x, y| {
            (x as f64 - c).abs() <= hole_half as f64 && (y as f64 - c).abs() <= hole_half as f64
        });
        let damaged = Image::from_fn(size, size, |x, y| {
            if mask.get(x, y, 0) {
                0.0
            } else {
                clean.get(x, y)
            }
        });
        Ok(Self {
            clean,
            damaged,
            mask,
            angles,
            line_width,
            hole_half,
        })
    }

    /// The configuration used by the inpainting experiments: 65 px, lines at
    /// 60° to each other, a 13 px hole.
    pub fn standard() -> Self {
        Self::new(65, [PI / 6.0, PI / 2.0], 1.2, 6).expect("valid standard fixture")
    }

    fn size(&self) -> usize {
        self.clean.width()
    }

    fn in_hole(&self, x: f64, y: f64) -> bool {
        let c = centre(self.size());
        let h = self.hole_half as f64;
        (x - c).abs() <= h && (y - c).abs() <= h
    }

    /// Recovery of both branches through the hole, in `[0, 1]` for sensible
    /// results.
    ///
    /// For each line the mean of `img` along its centreline inside the hole,
    /// minus the mean of hole pixels far from both lines, is divided by the
    /// same contrast measured along the line just outside the hole. The
    /// score is the smaller of the two ratios, so a hole flooded with a flat
    /// value scores near zero and a restored crossing near one.
    pub fn line_path_score(&self, img: &Image) -> f64 {
        let [a, b] = self.line_path_scores(img);
        a.min(b)
    }

    /// Per-line recovery ratios behind [`Self::line_path_score`].
    pub fn line_path_scores(&self, img: &Image) -> [f64; 2] {
        let c = centre(self.size());
        let h = self.hole_half as f64;
        let far = 3.0 * self.line_width + 1.0;
        let (mut bg_in, mut n_in, mut bg_out, mut n_out) = (0.0, 0usize, 0.0, 0usize);
        for y in 0..self.size() {
            for x in 0..self.size() {
                let (xf, yf) = (x as f64, y as f64);
                let d = self
                    .angles
                    .iter()
                    .map(|&a| line_distance(xf, yf, c, c, a))
                    .fold(f64::INFINITY, f64::min);
                if d <= far {
                    continue;
                }
                let r = (xf - c).abs().max((yf - c).abs());
                if self.in_hole(xf, yf) {
                    bg_in += img.get(x, y);
                    n_in += 1;
                } else if r <= 2.0 * h + 4.0 {
                    bg_out += img.get(x, y);
                    n_out += 1;
                }
            }
        }
        let bg_in = bg_in / n_in.max(1) as f64;
        let bg_out = bg_out / n_out.max(1) as f64;

        self.angles.map(|a| {
            let (dx, dy) = (a.cos(), a.sin());
            let (mut inside, mut ni, mut outside, mut no) = (0.0, 0usize, 0.0, 0usize);
            let reach = 2.0 * h * std::f64::consts::SQRT_2 + 4.0;
            let mut t = -reach;
            while t <= reach {
                let (x, y) = (c + t * dx, c + t * dy);
                let v = img.bilinear(x, y);
                if self.in_hole(x, y) {
                    inside += v;
                    ni += 1;
                } else if (h + 1.0..=2.0 * h + 4.0).contains(&(x - c).abs().max((y - c).abs())) {
                    outside += v;
                    no += 1;
                }
                t += 0.5;
            }
            let ambient = outside / no.max(1) as f64 - bg_out;
            if ambient <= 0.0 {
                return 0.0;
            }
            (inside / ni.max(1) as f64 - bg_in) / ambient
        })
    }
}
