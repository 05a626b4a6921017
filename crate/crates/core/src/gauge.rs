//! Data-adapted gauge frames.
//!
//! The first gauge vector minimises `‖M_ξ⁻¹ H X‖₂` over `‖M_ξ X‖₂ = 1`,
//! where `H^i_j = 𝒜_j 𝒜_i U` is taken in the invariant frame and
//! `M_ξ = diag(ξ, ξ, 1)`. Substituting `X̃ = M_ξ X` turns this into a
//! smallest-singular-vector problem for `M_ξ⁻¹ H M_ξ⁻¹`. The second vector
//! is the purely spatial `𝒢_ξ`-unit vector perpendicular to the first, and
//! the third completes a right-handed `𝒢_ξ`-orthonormal triple.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::Matrix3;
use rayon::prelude::*;

use crate::diffops::{derivative_first, gaussian_regularize, invariant_frame, Axis};
use crate::error::{invalid, Result};
use crate::frame::{invariant_at, FrameField};
use crate::grid::Volume;

/// Per-voxel `3 × 3` matrices, `H[i][j] = 𝒜_j 𝒜_i U` (row `i`, column `j`).
#[derive(Debug, Clone, PartialEq)]
pub struct HessianField {
    shape: (usize, usize, usize),
    values: Vec<[[f64; 3]; 3]>,
}

impl HessianField {
    pub fn shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    pub fn at(&self, idx: usize) -> &[[f64; 3]; 3] {
        &self.values[idx]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Nested central differences in the invariant frame, each of the nine
/// components then smoothed spatially with `reg_sigma`.
pub fn hessian_field(v: &Volume, reg_sigma: f64) -> HessianField {
    let frame = invariant_frame(v);
    let first: Vec<Volume> = Axis::ALL
        .iter()
        .map(|&a| derivative_first(v, &frame, a).expect("frame built for this grid"))
        .collect();
    let mut comps: Vec<Vec<f64>> = Vec::with_capacity(9);
    for d in &first {
        for &a in &Axis::ALL {
            let c = derivative_first(d, &frame, a).expect("frame built for this grid");
            let c = if reg_sigma > 0.0 {
                gaussian_regularize(&c, reg_sigma, 0.0)
            } else {
                c
            };
            comps.push(c.into_data());
        }
    }
    let values = (0..v.len())
        .map(|idx| {
            let mut m = [[0.0; 3]; 3];
            for (i, row) in m.iter_mut().enumerate() {
                for (j, e) in row.iter_mut().enumerate() {
                    *e = comps[3 * i + j][idx];
                }
            }
            m
        })
        .collect();
    HessianField {
        shape: v.shape(),
        values,
    }
}

/// Outcome counters of a frame fit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GaugeDiagnostics {
    /// Voxels where the two smallest singular values were too close.
    pub degenerate: usize,
    /// Voxels where the decomposition failed or produced non-finite output.
    pub svd_failures: usize,
}

/// Result of solving for the first gauge vector at one voxel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FirstVector {
    /// `B₁ = M_ξ⁻¹ X̃` in invariant-frame components, `‖M_ξ B₁‖₂ = 1`.
    Found([f64; 3]),
    Degenerate,
    Failed,
}

/// Smallest right-singular vector of `M_ξ⁻¹ H M_ξ⁻¹`, sign-fixed so that its
/// spatial part points along `𝒜₁` (or, when purely angular, along `+𝒜₃`).
pub fn first_gauge_vector(h: &[[f64; 3]; 3], xi: f64, degeneracy_tol: f64) -> FirstVector {
    let m = [xi, xi, 1.0];
    let a = Matrix3::from_fn(|i, j| h[i][j] / (m[i] * m[j]));
    if !a.iter().all(|x| x.is_finite()) {
        return FirstVector::Failed;
    }
    let svd = a.svd(false, true);
    let Some(v_t) = svd.v_t else {
        return FirstVector::Failed;
    };
    let s = svd.singular_values;
    if !s.iter().all(|x| x.is_finite()) {
        return FirstVector::Failed;
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| s[i].total_cmp(&s[j]));
    let (smin, snext) = (s[order[0]], s[order[1]]);
    if snext - smin <= degeneracy_tol * snext {
        return FirstVector::Degenerate;
    }
    let row = v_t.row(order[0]);
    let mut x = [row[0], row[1], row[2]];
    let norm = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return FirstVector::Failed;
    }
    x.iter_mut().for_each(|c| *c /= norm);
    let spatial = x[0].hypot(x[1]);
    let flip = if spatial > 1e-12 {
        if x[0].abs() > 1e-12 {
            x[0] < 0.0
        } else {
            x[1] < 0.0
        }
    } else {
        x[2] < 0.0
    };
    if flip {
        x.iter_mut().for_each(|c| *c = -*c);
    }
    FirstVector::Found([x[0] / xi, x[1] / xi, x[2]])
}

/// Completes `X̃ = M_ξ B₁` to a frame stored with the invariant frame's
/// `𝒢_ξ` norms `(ξ, ξ, 1)`, in invariant-frame components.
fn complete_frame(b1: [f64; 3], xi: f64) -> [[f64; 3]; 3] {
    let x1 = [b1[0] * xi, b1[1] * xi, b1[2]];
    let spatial = x1[0].hypot(x1[1]);
    let x2 = if spatial > 1e-9 {
        [-x1[1] / spatial, x1[0] / spatial, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let x3 = [
        x1[1] * x2[2] - x1[2] * x2[1],
        x1[2] * x2[0] - x1[0] * x2[2],
        x1[0] * x2[1] - x1[1] * x2[0],
    ];
    // stored E1 = ξ B1, E2 = ξ B2, E3 = B3 with B_i = M_ξ⁻¹ X_i
    [
        [x1[0], x1[1], xi * x1[2]],
        [x2[0], x2[1], xi * x2[2]],
        [x3[0] / xi, x3[1] / xi, x3[2]],
    ]
}

fn to_coordinates(inv: [[f64; 3]; 3], theta: f64) -> [[f64; 3]; 3] {
    let (s, c) = theta.sin_cos();
    inv.map(|e| [e[0] * c - e[1] * s, e[0] * s + e[1] * c, e[2]])
}

/// Components of the stored frame vectors with respect to the invariant frame
/// at voxel `idx`.
pub fn invariant_components(frame: &FrameField, idx: usize) -> [[f64; 3]; 3] {
    let (w, h, n) = frame.shape();
    let k = idx / (w * h);
    let theta = k as f64 * std::f64::consts::TAU / n as f64;
    let (s, c) = theta.sin_cos();
    frame
        .at(idx)
        .map(|e| [e[0] * c + e[1] * s, -e[0] * s + e[1] * c, e[2]])
}

/// Curvature `κ` encoded by the first frame vector: angular over spatial
/// component (radians per pixel).
pub fn curvature(frame: &FrameField, idx: usize) -> f64 {
    let e = frame.vector(idx, 0);
    e[2] / e[0].hypot(e[1])
}

/// Spatial angle between the first frame vector and `𝒜₁`.
pub fn deviation_from_horizontality(frame: &FrameField, idx: usize) -> f64 {
    let e = invariant_components(frame, idx)[0];
    e[1].atan2(e[0])
}

/// Fits a gauge frame at every voxel; degenerate voxels and decomposition
/// failures keep the invariant frame.
pub fn fit_gauge_frame(
    v: &Volume,
    xi: f64,
    reg_sigma: f64,
    degeneracy_tol: f64,
) -> Result<(FrameField, GaugeDiagnostics)> {
    if !(xi > 0.0) {
        return Err(invalid("xi", format!("must be positive, got {xi}")));
    }
    let hess = hessian_field(v, reg_sigma);
    let degenerate = AtomicUsize::new(0);
    let failed = AtomicUsize::new(0);
    let slice = v.slice_len();
    let dtheta = v.dtheta();
    let vectors: Vec<[[f64; 3]; 3]> = (0..v.len())
        .into_par_iter()
        .map(|idx| {
            let theta = (idx / slice) as f64 * dtheta;
            match first_gauge_vector(hess.at(idx), xi, degeneracy_tol) {
                FirstVector::Found(b1) => to_coordinates(complete_frame(b1, xi), theta),
                FirstVector::Degenerate => {
                    degenerate.fetch_add(1, Ordering::Relaxed);
                    invariant_at(theta)
                }
                FirstVector::Failed => {
                    failed.fetch_add(1, Ordering::Relaxed);
                    invariant_at(theta)
                }
            }
        })
        .collect();
    let diag = GaugeDiagnostics {
        degenerate: degenerate.into_inner(),
        svd_failures: failed.into_inner(),
    };
    if diag.svd_failures > 0 {
        log::warn!(
            "gauge fit: {} voxels fell back after SVD failure",
            diag.svd_failures
        );
    }
    Ok((FrameField::from_vectors(v.shape(), xi, vectors), diag))
}
