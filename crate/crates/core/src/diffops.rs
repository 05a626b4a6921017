//! Finite differences along frame directions on `(x, y, θ)` volumes.
//!
//! Every operator samples the volume at `p ± h·B_i`, where `B_i` is the
//! `i`-th frame vector at `p` and `h` is one pixel for the first two frame
//! vectors and one angular step for the third. Off-grid samples use
//! [`trilinear_sample`], so all central stencils are convex in the sampled
//! values.

use rayon::prelude::*;

use crate::error::Result;
use crate::filter::{blur_orientations, blur_slices};
use crate::frame::{stencil_steps, DiagonalMetric, FrameField};
use crate::grid::{trilinear_sample, Volume};

/// Index of a frame vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    /// Along the local orientation (`𝒜₁`).
    Main,
    /// Spatially perpendicular to it (`𝒜₂`).
    Lateral,
    /// Angular (`𝒜₃`).
    Angular,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Main, Axis::Lateral, Axis::Angular];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Axis::Main => 0,
            Axis::Lateral => 1,
            Axis::Angular => 2,
        }
    }
}

/// Which side the upwind stencil looks towards.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Morphology {
    /// Grows bright structures: differences towards larger neighbours.
    Dilation,
    /// Grows dark structures: differences towards smaller neighbours.
    Erosion,
}

/// The left-invariant frame for `v`'s grid.
pub fn invariant_frame(v: &Volume) -> FrameField {
    FrameField::invariant(v.width(), v.height(), v.orientations())
}

/// Per-voxel access to the stencil samples of one volume.
#[derive(Clone, Copy)]
pub(crate) struct Stencil<'a> {
    v: &'a Volume,
    frame: &'a FrameField,
    steps: [f64; 3],
    width: usize,
    slice: usize,
    dtheta: f64,
}

impl<'a> Stencil<'a> {
    pub(crate) fn new(v: &'a Volume, frame: &'a FrameField) -> Result<Self> {
        frame.check_grid(v)?;
        Ok(Self {
            v,
            frame,
            steps: stencil_steps(1.0, v.dtheta()),
            width: v.width(),
            slice: v.slice_len(),
            dtheta: v.dtheta(),
        })
    }

    /// `(U(p), U(p + h B_i), U(p − h B_i))`.
    #[inline]
    pub(crate) fn samples(&self, idx: usize, axis: Axis) -> (f64, f64, f64) {
        let k = idx / self.slice;
        let rem = idx - k * self.slice;
        let (y, x) = (rem / self.width, rem % self.width);
        let b = self.frame.vector(idx, axis.index());
        let h = self.steps[axis.index()];
        let dx = h * b[0];
        let dy = h * b[1];
        let dk = h * b[2] / self.dtheta;
        let (xf, yf, kf) = (x as f64, y as f64, k as f64);
        let centre = self.v.data()[idx];
        let fwd = trilinear_sample(self.v, xf + dx, yf + dy, kf + dk);
        let bwd = trilinear_sample(self.v, xf - dx, yf - dy, kf - dk);
        (centre, fwd, bwd)
    }

    #[inline]
    pub(crate) fn step(&self, axis: Axis) -> f64 {
        self.steps[axis.index()]
    }

    #[inline]
    pub(crate) fn first(&self, idx: usize, axis: Axis) -> f64 {
        let (_, f, b) = self.samples(idx, axis);
        (f - b) / (2.0 * self.step(axis))
    }

    #[inline]
    pub(crate) fn second(&self, idx: usize, axis: Axis) -> f64 {
        let (c, f, b) = self.samples(idx, axis);
        let h = self.step(axis);
        (f - 2.0 * c + b) / (h * h)
    }

    #[inline]
    pub(crate) fn upwind(&self, idx: usize, axis: Axis, mode: Morphology) -> f64 {
        let (c, f, b) = self.samples(idx, axis);
        let d = match mode {
            Morphology::Dilation => (f - c).max(b - c),
            Morphology::Erosion => (c - f).max(c - b),
        };
        d.max(0.0) / self.step(axis)
    }

    #[inline]
    pub(crate) fn laplacian(&self, idx: usize, dual: [f64; 3], axes: &[Axis]) -> f64 {
        axes.iter()
            .filter(|a| dual[a.index()] != 0.0)
            .map(|&a| dual[a.index()] * self.second(idx, a))
            .sum()
    }

    #[inline]
    pub(crate) fn gradient_norm_central(&self, idx: usize, dual: [f64; 3]) -> f64 {
        Axis::ALL
            .iter()
            .filter(|a| dual[a.index()] != 0.0)
            .map(|&a| dual[a.index()] * self.first(idx, a).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    #[inline]
    pub(crate) fn gradient_norm_upwind(&self, idx: usize, dual: [f64; 3], mode: Morphology) -> f64 {
        Axis::ALL
            .iter()
            .filter(|a| dual[a.index()] != 0.0)
            .map(|&a| dual[a.index()] * self.upwind(idx, a, mode).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Smallest number of voxels handed to one parallel task.
pub(crate) const PAR_CHUNK: usize = 2048;

pub(crate) fn map_voxels(v: &Volume, f: impl Fn(usize) -> f64 + Sync) -> Volume {
    let data: Vec<f64> = (0..v.len())
        .into_par_iter()
        .with_min_len(PAR_CHUNK)
        .map(&f)
        .collect();
    v.with_data(data)
}

/// Central first derivative `(U(p + hB_i) − U(p − hB_i)) / 2h`.
pub fn derivative_first(v: &Volume, frame: &FrameField, axis: Axis) -> Result<Volume> {
    let st = Stencil::new(v, frame)?;
    Ok(map_voxels(v, |i| st.first(i, axis)))
}

/// Central second derivative `(U(p + hB_i) − 2U(p) + U(p − hB_i)) / h²`.
pub fn derivative_second(v: &Volume, frame: &FrameField, axis: Axis) -> Result<Volume> {
    let st = Stencil::new(v, frame)?;
    Ok(map_voxels(v, |i| st.second(i, axis)))
}

/// `g^{11}B₁² + g^{22}B₂² + g^{33}B₃²`.
pub fn laplacian(v: &Volume, frame: &FrameField, m: &DiagonalMetric) -> Result<Volume> {
    let st = Stencil::new(v, frame)?;
    let dual = m.dual();
    Ok(map_voxels(v, |i| st.laplacian(i, dual, &Axis::ALL)))
}

/// Laplacian across the local orientation: `g^{22}B₂² + g^{33}B₃²`.
pub fn perpendicular_laplacian(
    v: &Volume,
    frame: &FrameField,
    m: &DiagonalMetric,
) -> Result<Volume> {
    let st = Stencil::new(v, frame)?;
    let dual = m.dual();
    Ok(map_voxels(v, |i| {
        st.laplacian(i, dual, &[Axis::Lateral, Axis::Angular])
    }))
}

/// `sqrt(Σ g^{ii} |B_i U|²)` with central differences.
pub fn gradient_norm_central(v: &Volume, frame: &FrameField, m: &DiagonalMetric) -> Result<Volume> {
    let st = Stencil::new(v, frame)?;
    let dual = m.dual();
    Ok(map_voxels(v, |i| st.gradient_norm_central(i, dual)))
}

/// Rouy–Tourin upwind gradient norm.
///
/// Per direction the one-sided difference towards the larger neighbour
/// (dilation) or the smaller one (erosion) is taken, clipped at zero.
pub fn gradient_norm_upwind(
    v: &Volume,
    frame: &FrameField,
    m: &DiagonalMetric,
    mode: Morphology,
) -> Result<Volume> {
    let st = Stencil::new(v, frame)?;
    let dual = m.dual();
    Ok(map_voxels(v, |i| st.gradient_norm_upwind(i, dual, mode)))
}

/// Separable Gaussian regularisation: isotropic spatial blur of every
/// orientation slice (`sigma_spatial` in pixels), followed by a periodic
/// blur along θ (`sigma_angular` in radians).
pub fn gaussian_regularize(v: &Volume, sigma_spatial: f64, sigma_angular: f64) -> Volume {
    let (w, h, n) = v.shape();
    let mut data = blur_slices(v.data(), w, h, n, sigma_spatial);
    if sigma_angular > 0.0 {
        data = blur_orientations(&data, w * h, n, sigma_angular / v.dtheta());
    }
    v.with_data(data)
}
