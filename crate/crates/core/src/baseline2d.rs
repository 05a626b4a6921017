//! Planar diffusion-shock filtering, used as the comparison baseline.
//!
//! ```text
//! ∂_t u = g(|∇u_ν|²) Δu − (1 − g(|∇u_ν|²)) · S(∂_ww u_σ) · |∇u|
//! ```
//!
//! where `w` is the dominant eigenvector of the structure tensor
//! `J_ρ(∇u_σ)`. Diffusion uses the 5-point Laplacian, the morphological term
//! a Rouy–Tourin upwind gradient; borders are mirrored.

use rayon::prelude::*;

use crate::error::{invalid, RdsError, Result};
use crate::filter::{blur_plane, gaussian_blur, gaussian_kernel};
use crate::grid::{min_max, Image, Mask};
use crate::rds::{charbonnier, shock_sigmoid};

/// Per-pixel symmetric `2 × 2` tensors `(J11, J12, J22)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureTensorField {
    width: usize,
    height: usize,
    pub sigma: f64,
    pub rho: f64,
    values: Vec<[f64; 3]>,
}

impl StructureTensorField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn at(&self, x: usize, y: usize) -> [f64; 3] {
        self.values[y * self.width + x]
    }

    pub fn values(&self) -> &[[f64; 3]] {
        &self.values
    }

    /// Eigenvalues `(λ_max, λ_min)` at a pixel.
    pub fn eigenvalues(&self, x: usize, y: usize) -> (f64, f64) {
        eigenvalues(self.at(x, y))
    }
}

fn eigenvalues([a, b, c]: [f64; 3]) -> (f64, f64) {
    let mean = 0.5 * (a + c);
    let r = (0.5 * (a - c)).hypot(b);
    (mean + r, mean - r)
}

/// Central-difference gradient with mirrored borders.
fn gradient(u: &Image, x: usize, y: usize) -> (f64, f64) {
    let (xi, yi) = (x as i64, y as i64);
    (
        0.5 * (u.get_reflect(xi + 1, yi) - u.get_reflect(xi - 1, yi)),
        0.5 * (u.get_reflect(xi, yi + 1) - u.get_reflect(xi, yi - 1)),
    )
}

/// `J_ρ(∇u_σ) = K_ρ ∗ (∇u_σ ∇u_σᵀ)`.
pub fn structure_tensor(f: &Image, sigma: f64, rho: f64) -> Result<StructureTensorField> {
    if !(sigma >= 0.0 && rho >= 0.0) {
        return Err(invalid("scales", "sigma and rho must be non-negative"));
    }
    let us = gaussian_blur(f, sigma);
    let (w, h) = (f.width(), f.height());
    let mut comps = [vec![0.0; w * h], vec![0.0; w * h], vec![0.0; w * h]];
    for y in 0..h {
        for x in 0..w {
            let (gx, gy) = gradient(&us, x, y);
            let i = y * w + x;
            comps[0][i] = gx * gx;
            comps[1][i] = gx * gy;
            comps[2][i] = gy * gy;
        }
    }
    let k = gaussian_kernel(rho);
    let [j11, j12, j22] = comps.map(|c| blur_plane(&c, w, h, &k));
    let values = (0..w * h).map(|i| [j11[i], j12[i], j22[i]]).collect();
    Ok(StructureTensorField {
        width: w,
        height: h,
        sigma,
        rho,
        values,
    })
}

/// Unit eigenvector of the larger eigenvalue of one tensor, with
/// non-negative `x` (ties: non-negative `y`). Returns `(1, 0)` when the
/// eigenvalue gap is at most `tol`.
pub fn dominant_eigenvector(j: [f64; 3], tol: f64) -> [f64; 2] {
    let [a, b, c] = j;
    let (l1, l2) = eigenvalues(j);
    if l1 - l2 <= tol {
        return [1.0, 0.0];
    }
    // (J - λ₂ I) has the dominant eigenvector in its column space; take the
    // longer column for accuracy.
    let c1 = [a - l2, b];
    let c2 = [b, c - l2];
    let v = if c1[0].hypot(c1[1]) >= c2[0].hypot(c2[1]) {
        c1
    } else {
        c2
    };
    let n = v[0].hypot(v[1]);
    let mut v = [v[0] / n, v[1] / n];
    if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) {
        v = [-v[0], -v[1]];
    }
    v
}

/// Dominant direction at every pixel, row-major.
pub fn dominant_direction(j: &StructureTensorField, tol: f64) -> Vec<[f64; 2]> {
    j.values
        .iter()
        .map(|&t| dominant_eigenvector(t, tol))
        .collect()
}

/// Parameters of the planar scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rds2dParams {
    pub lambda: f64,
    pub sigma: f64,
    pub rho: f64,
    pub nu: f64,
    pub eps: f64,
}

impl Default for Rds2dParams {
    fn default() -> Self {
        Self {
            lambda: 0.05,
            sigma: 1.0,
            rho: 2.0,
            nu: 1.0,
            eps: 1e-2,
        }
    }
}

/// `min(Δxy²/4, Δxy/√2)`, the planar counterpart of the oriented bound.
pub fn stable_timestep_2d(dxy: f64) -> f64 {
    (dxy * dxy / 4.0).min(dxy / std::f64::consts::SQRT_2)
}

/// One explicit step of the planar scheme. Pixels with `mask == false` keep
/// their value from `hold` (or from `u` without `hold`).
pub fn rds2d_step(
    u: &Image,
    p: &Rds2dParams,
    tau: f64,
    mask: Option<(&Mask, &Image)>,
) -> Result<Image> {
    if !(tau > 0.0) {
        return Err(invalid("tau", "must be positive"));
    }
    let (w, h) = (u.width(), u.height());
    let u_nu = gaussian_blur(u, p.nu);
    let u_sigma = gaussian_blur(u, p.sigma);
    let tensor = structure_tensor(u, p.sigma, p.rho)?;
    let dirs = dominant_direction(&tensor, 1e-12);

    let data: Vec<f64> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % w, i / w);
            if let Some((m, hold)) = mask {
                if !m.get(x, y, 0) {
                    return hold.get(x, y);
                }
            }
            let (xi, yi) = (x as i64, y as i64);
            let c = u.get(x, y);
            let (gx, gy) = gradient(&u_nu, x, y);
            let g = charbonnier(gx * gx + gy * gy, p.lambda);

            let xp = u.get_reflect(xi + 1, yi);
            let xm = u.get_reflect(xi - 1, yi);
            let yp = u.get_reflect(xi, yi + 1);
            let ym = u.get_reflect(xi, yi - 1);
            let lap = xp + xm + yp + ym - 4.0 * c;

            let [wx, wy] = dirs[i];
            let (xf, yf) = (x as f64, y as f64);
            let dww = u_sigma.bilinear(xf + wx, yf + wy) - 2.0 * u_sigma.get(x, y)
                + u_sigma.bilinear(xf - wx, yf - wy);
            let s = shock_sigmoid(dww, p.eps);
            let grad = if s < 0.0 {
                let dx = (xp - c).max(xm - c).max(0.0);
                let dy = (yp - c).max(ym - c).max(0.0);
                dx.hypot(dy)
            } else if s > 0.0 {
                let dx = (c - xp).max(c - xm).max(0.0);
                let dy = (c - yp).max(c - ym).max(0.0);
                dx.hypot(dy)
            } else {
                0.0
            };
            c + tau * (g * lap - (1.0 - g) * s * grad)
        })
        .collect();
    Image::new(w, h, data)
}

/// Evolves `f` to time `t_end`; `mask` marks the pixels that may change.
pub fn run_rds2d(f: &Image, p: &Rds2dParams, t_end: f64, mask: Option<&Mask>) -> Result<Image> {
    if let Some(m) = mask {
        m.check_image(f)?;
    }
    let tau_max = stable_timestep_2d(1.0);
    let (lo, hi) = f.min_max();
    let slack = 1e-6 * (hi - lo).max(f64::MIN_POSITIVE);
    let mut u = f.clone();
    let mut t = 0.0;
    let mut step = 0;
    while t_end - t > 1e-12 * t_end {
        let tau = tau_max.min(t_end - t);
        u = rds2d_step(&u, p, tau, mask.map(|m| (m, f)))?;
        step += 1;
        t += tau;
        let (min, max) = min_max(u.data());
        if !(min >= lo - slack && max <= hi + slack) {
            return Err(RdsError::Instability {
                step,
                tau,
                lo,
                hi,
                min,
                max,
            });
        }
    }
    Ok(u)
}
