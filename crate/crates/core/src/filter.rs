//! Separable Gaussian smoothing on images and volume slices.

use rayon::prelude::*;

use crate::grid::{reflect_spatial, wrap_orientation, Image};

/// Normalised sampled Gaussian with radius `ceil(4σ)`; `[1.0]` for `σ = 0`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (4.0 * sigma).ceil().max(1.0) as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= total);
    k
}

/// Convolves each row and then each column of a `width × height` plane with
/// `kernel`, mirroring at the borders.
pub(crate) fn blur_plane(data: &[f64], width: usize, height: usize, kernel: &[f64]) -> Vec<f64> {
    if kernel.len() == 1 {
        return data.to_vec();
    }
    let r = (kernel.len() / 2) as i64;
    let mut tmp = vec![0.0; data.len()];
    for y in 0..height {
        let row = &data[y * width..(y + 1) * width];
        for x in 0..width {
            let mut acc = 0.0;
            for (j, w) in kernel.iter().enumerate() {
                acc += w * row[reflect_spatial(x as i64 + j as i64 - r, width)];
            }
            tmp[y * width + x] = acc;
        }
    }
    let mut out = vec![0.0; data.len()];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for (j, w) in kernel.iter().enumerate() {
                acc += w * tmp[reflect_spatial(y as i64 + j as i64 - r, height) * width + x];
            }
            out[y * width + x] = acc;
        }
    }
    out
}

/// Isotropic Gaussian blur of an image with mirrored borders.
pub fn gaussian_blur(img: &Image, sigma: f64) -> Image {
    let k = gaussian_kernel(sigma);
    let data = blur_plane(img.data(), img.width(), img.height(), &k);
    Image::new(img.width(), img.height(), data).expect("blur preserves shape")
}

/// Spatial blur of every orientation slice of a flat volume buffer.
pub(crate) fn blur_slices(
    data: &[f64],
    width: usize,
    height: usize,
    orientations: usize,
    sigma: f64,
) -> Vec<f64> {
    let k = gaussian_kernel(sigma);
    if k.len() == 1 {
        return data.to_vec();
    }
    let n = width * height;
    let slices: Vec<Vec<f64>> = (0..orientations)
        .into_par_iter()
        .map(|s| blur_plane(&data[s * n..(s + 1) * n], width, height, &k))
        .collect();
    slices.concat()
}

/// Periodic blur along the orientation axis; `sigma` in index units.
pub(crate) fn blur_orientations(
    data: &[f64],
    slice_len: usize,
    orientations: usize,
    sigma: f64,
) -> Vec<f64> {
    let k = gaussian_kernel(sigma);
    if k.len() == 1 {
        return data.to_vec();
    }
    let r = (k.len() / 2) as i64;
    let mut out = vec![0.0; data.len()];
    out.par_chunks_mut(slice_len)
        .enumerate()
        .for_each(|(o, dst)| {
            for (j, w) in k.iter().enumerate() {
                let src = wrap_orientation(o as i64 + j as i64 - r, orientations);
                let plane = &data[src * slice_len..(src + 1) * slice_len];
                for (d, s) in dst.iter_mut().zip(plane) {
                    *d += w * s;
                }
            }
        });
    out
}
