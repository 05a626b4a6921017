//! Cake wavelets, orientation scores and their reconstruction by summation.
//!
//! The wavelets are designed in the Fourier domain on a `size × size`
//! frequency grid: an angular B-spline wedge centred on `θ_k + π/2` (the
//! direction across a line of orientation `θ_k`) times a radial low-pass
//! window. The angular wedges of all `K` orientations partition unity on
//! `[0, 2π)`, and the DC bin is shared equally, so the real parts of the
//! kernels sum to the radial window and `Σ_k 𝒲_ψ f(·, θ_k) ≈ f` on the pass
//! band.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, mismatch, Result};
use crate::grid::{Image, Volume};

/// `K` rotated copies of a complex cake wavelet on a square support.
#[derive(Debug, Clone)]
pub struct WaveletStack {
    size: usize,
    angular_order: usize,
    inflection: f64,
    /// Row-major `size × size` kernels, centre at `(size/2, size/2)`.
    kernels: Vec<Vec<Complex64>>,
}

impl WaveletStack {
    pub fn orientations(&self) -> usize {
        self.kernels.len()
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radius(&self) -> usize {
        self.size / 2
    }

    pub fn angular_order(&self) -> usize {
        self.angular_order
    }

    pub fn inflection(&self) -> f64 {
        self.inflection
    }

    pub fn kernel(&self, k: usize) -> &[Complex64] {
        &self.kernels[k]
    }

    /// Kernel value at offset `(dx, dy)` from the centre.
    pub fn at(&self, k: usize, dx: i64, dy: i64) -> Complex64 {
        let r = self.radius() as i64;
        assert!(dx.abs() <= r && dy.abs() <= r);
        self.kernels[k][((dy + r) as usize) * self.size + (dx + r) as usize]
    }

    /// The discrete-time Fourier transform of kernel `k` at angular frequency
    /// `(wx, wy)` (radians per pixel), `Σ_x ψ(x) e^{-i ω·x}`.
    pub fn dtft(&self, k: usize, wx: f64, wy: f64) -> Complex64 {
        let r = self.radius() as i64;
        let mut acc = Complex64::new(0.0, 0.0);
        for dy in -r..=r {
            for dx in -r..=r {
                let phase = -(wx * dx as f64 + wy * dy as f64);
                acc += self.at(k, dx, dy) * Complex64::from_polar(1.0, phase);
            }
        }
        acc
    }
}

/// Centred cardinal B-spline of order `n` (support `[-(n+1)/2, (n+1)/2]`).
pub fn bspline(n: usize, x: f64) -> f64 {
    let half = (n as f64 + 1.0) / 2.0;
    if x.abs() >= half {
        // the order-0 box is half-open so that shifted copies partition unity
        return if n == 0 && x == -0.5 { 1.0 } else { 0.0 };
    }
    let mut sum = 0.0;
    let mut binom = 1.0;
    for j in 0..=n + 1 {
        let t = x + half - j as f64;
        if t > 0.0 {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * binom * t.powi(n as i32);
        }
        binom = binom * (n + 1 - j) as f64 / (j + 1) as f64;
    }
    let fact: f64 = (1..=n).map(|i| i as f64).product();
    sum / fact
}

/// Radial window: 1 up to `inflection · Nyquist`, raised-cosine roll-off to
/// zero at Nyquist. `rho` is the frequency radius relative to Nyquist.
pub fn radial_window(rho: f64, inflection: f64) -> f64 {
    if rho <= inflection {
        1.0
    } else if rho >= 1.0 {
        0.0
    } else {
        let t = (rho - inflection) / (1.0 - inflection);
        (0.5 * PI * t).cos().powi(2)
    }
}

/// Angular weight of orientation `k` at Fourier angle `phi`.
fn angular_weight(phi: f64, k: usize, orientations: usize, order: usize) -> f64 {
    let step = TAU / orientations as f64;
    let centre = k as f64 * step + 0.5 * PI;
    let d = (phi - centre).rem_euclid(TAU);
    // periodic sum of the wedge over neighbouring turns
    (-2..=1)
        .map(|m| bspline(order, (d + m as f64 * TAU) / step))
        .sum()
}

/// Builds `K` cake wavelets on a `size × size` support.
pub fn build_cake_wavelets(
    orientations: usize,
    size: usize,
    angular_order: usize,
    inflection: f64,
) -> Result<WaveletStack> {
    if orientations < 4 {
        return Err(invalid(
            "orientations",
            format!("need at least 4, got {orientations}"),
        ));
    }
    if size < 9 {
        return Err(invalid("size", format!("need at least 9, got {size}")));
    }
    if size.is_multiple_of(2) {
        return Err(invalid(
            "size",
            format!("must be odd to have a centre pixel, got {size}"),
        ));
    }
    if !(inflection > 0.0 && inflection < 1.0) {
        return Err(invalid(
            "inflection",
            format!("must lie in (0, 1), got {inflection}"),
        ));
    }
    let r = (size / 2) as i64;
    let n = size as f64;
    // precomputed phases e^{2πi u x / size} for u, x in [-r, r]
    let twiddle: Vec<Complex64> = (-r..=r)
        .flat_map(|u| (-r..=r).map(move |x| Complex64::from_polar(1.0, TAU * (u * x) as f64 / n)))
        .collect();
    let tw = |u: i64, x: i64| twiddle[((u + r) * (2 * r + 1) + (x + r)) as usize];

    let kernels = (0..orientations)
        .into_par_iter()
        .map(|k| {
            // Fourier samples, rows = v, columns = u
            let mut spectrum = vec![0.0; size * size];
            for v in -r..=r {
                for u in -r..=r {
                    let idx = ((v + r) as usize) * size + (u + r) as usize;
                    spectrum[idx] = if u == 0 && v == 0 {
                        1.0 / orientations as f64
                    } else {
                        let rho = (u as f64).hypot(v as f64) / (0.5 * n);
                        let phi = (v as f64).atan2(u as f64);
                        radial_window(rho, inflection)
                            * angular_weight(phi, k, orientations, angular_order)
                    };
                }
            }
            // separable inverse DFT: first along u, then along v
            let mut partial = vec![Complex64::new(0.0, 0.0); size * size];
            for v in -r..=r {
                let row = &spectrum[((v + r) as usize) * size..((v + r + 1) as usize) * size];
                for x in -r..=r {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for u in -r..=r {
                        acc += tw(u, x) * row[(u + r) as usize];
                    }
                    partial[((v + r) as usize) * size + (x + r) as usize] = acc;
                }
            }
            let mut kernel = vec![Complex64::new(0.0, 0.0); size * size];
            let norm = 1.0 / (n * n);
            for y in -r..=r {
                for x in -r..=r {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for v in -r..=r {
                        acc += tw(v, y) * partial[((v + r) as usize) * size + (x + r) as usize];
                    }
                    kernel[((y + r) as usize) * size + (x + r) as usize] = acc * norm;
                }
            }
            kernel
        })
        .collect();

    Ok(WaveletStack {
        size,
        angular_order,
        inflection,
        kernels,
    })
}

struct Fft2 {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            width,
            height,
            row_fwd: planner.plan_fft_forward(width),
            col_fwd: planner.plan_fft_forward(height),
            row_inv: planner.plan_fft_inverse(width),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    fn run(&self, data: &mut [Complex64], inverse: bool) {
        let (rows, cols) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        rows.process(data);
        let mut column = vec![Complex64::new(0.0, 0.0); self.height];
        for x in 0..self.width {
            for y in 0..self.height {
                column[y] = data[y * self.width + x];
            }
            cols.process(&mut column);
            for y in 0..self.height {
                data[y * self.width + x] = column[y];
            }
        }
        if inverse {
            let s = 1.0 / (self.width * self.height) as f64;
            data.iter_mut().for_each(|c| *c *= s);
        }
    }
}

/// Orientation score `𝒲_ψ f(x, θ_k) = Σ_y conj(ψ_k(y − x)) f(y)`, real part.
///
/// The image is mirrored by the kernel radius on every side and the
/// correlations are evaluated with zero-padded power-of-two FFTs.
pub fn lift(f: &Image, w: &WaveletStack) -> Result<Volume> {
    let r = w.radius();
    if f.width() <= r || f.height() <= r {
        return Err(mismatch(
            format!("image wider and taller than the kernel radius {r}"),
            format!("{}x{}", f.width(), f.height()),
        ));
    }
    let (iw, ih) = (f.width(), f.height());
    let (pw, ph) = (iw + 2 * r, ih + 2 * r);
    let (fw, fh) = (pw.next_power_of_two(), ph.next_power_of_two());
    let fft = Fft2::new(fw, fh);

    let mut spectrum = vec![Complex64::new(0.0, 0.0); fw * fh];
    for y in 0..ph {
        for x in 0..pw {
            let v = f.get_reflect(x as i64 - r as i64, y as i64 - r as i64);
            spectrum[y * fw + x] = Complex64::new(v, 0.0);
        }
    }
    fft.run(&mut spectrum, false);

    let slices: Vec<Vec<f64>> = (0..w.orientations())
        .into_par_iter()
        .map(|k| {
            let mut kern = vec![Complex64::new(0.0, 0.0); fw * fh];
            let ri = r as i64;
            for dy in -ri..=ri {
                for dx in -ri..=ri {
                    let x = dx.rem_euclid(fw as i64) as usize;
                    let y = dy.rem_euclid(fh as i64) as usize;
                    kern[y * fw + x] = Complex64::new(w.at(k, dx, dy).re, 0.0);
                }
            }
            fft.run(&mut kern, false);
            // correlation with a real kernel: conj(K̂)·F̂
            for (kv, sv) in kern.iter_mut().zip(&spectrum) {
                *kv = kv.conj() * sv;
            }
            fft.run(&mut kern, true);
            let mut out = Vec::with_capacity(iw * ih);
            for y in 0..ih {
                for x in 0..iw {
                    out.push(kern[(y + r) * fw + x + r].re);
                }
            }
            out
        })
        .collect();

    Volume::new(iw, ih, w.orientations(), slices.concat())
}

/// Reconstruction by summation over orientations.
pub fn project(v: &Volume) -> Image {
    let n = v.slice_len();
    let mut out = vec![0.0; n];
    for k in 0..v.orientations() {
        for (o, s) in out.iter_mut().zip(v.slice_data(k)) {
            *o += s;
        }
    }
    Image::new(v.width(), v.height(), out).expect("projection preserves the spatial grid")
}
