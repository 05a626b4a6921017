//! Metrics and per-voxel frames on the `(x, y, θ)` grid.

use crate::error::{invalid, mismatch, Result};
use crate::grid::Volume;

/// A metric that is diagonal in the chosen frame.
///
/// Stored through its dual components `g^{ii} = 1/g_{ii}`. A dual component
/// of zero stands for an infinitely expensive direction, which turns the
/// corresponding term of a Laplacian or gradient norm off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagonalMetric {
    dual: [f64; 3],
}

impl DiagonalMetric {
    /// From the primal components `g11, g22, g33` (all strictly positive).
    pub fn new(g11: f64, g22: f64, g33: f64) -> Result<Self> {
        for g in [g11, g22, g33] {
            if !(g > 0.0 && g.is_finite()) {
                return Err(invalid(
                    "metric",
                    format!("components must be positive, got {g}"),
                ));
            }
        }
        Ok(Self {
            dual: [1.0 / g11, 1.0 / g22, 1.0 / g33],
        })
    }

    /// From the dual components `g^{11}, g^{22}, g^{33}` (non-negative).
    pub fn from_dual(d11: f64, d22: f64, d33: f64) -> Result<Self> {
        for d in [d11, d22, d33] {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(invalid(
                    "metric",
                    format!("dual components must be non-negative, got {d}"),
                ));
            }
        }
        Ok(Self {
            dual: [d11, d22, d33],
        })
    }

    /// `g11 = ξ²`, `g22 = (ξ/ζ)²`, `g33 = 1`.
    pub fn from_anisotropy(xi: f64, zeta: f64) -> Result<Self> {
        if !(xi > 0.0 && zeta > 0.0) {
            return Err(invalid("metric", "xi and zeta must be positive"));
        }
        Self::new(xi * xi, (xi / zeta).powi(2), 1.0)
    }

    /// The Euclidean metric on grid coordinates.
    pub fn identity() -> Self {
        Self { dual: [1.0; 3] }
    }

    #[inline]
    pub fn dual(&self) -> [f64; 3] {
        self.dual
    }

    /// Primal components; infinite where the dual component vanishes.
    pub fn primal(&self) -> [f64; 3] {
        self.dual.map(|d| 1.0 / d)
    }
}

/// Step lengths used by the stencils along each frame vector: one pixel for
/// the two spatial-like directions, one angular step for the third.
#[inline]
pub fn stencil_steps(dxy: f64, dtheta: f64) -> [f64; 3] {
    [dxy, dxy, dtheta]
}

/// Three tangent vectors per voxel, with components `(c_x, c_y, c_θ)` in
/// pixels and radians.
///
/// Frames are stored with the same `𝒢_ξ` norms as the left-invariant frame,
/// `(ξ, ξ, 1)`, so that a metric's components mean the same thing in either
/// frame. [`FrameField::unit_vectors`] returns the `𝒢_ξ`-orthonormal triple.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameField {
    width: usize,
    height: usize,
    orientations: usize,
    xi: f64,
    vectors: Vec<[[f64; 3]; 3]>,
}

impl FrameField {
    pub(crate) fn from_vectors(
        shape: (usize, usize, usize),
        xi: f64,
        vectors: Vec<[[f64; 3]; 3]>,
    ) -> Self {
        debug_assert_eq!(vectors.len(), shape.0 * shape.1 * shape.2);
        Self {
            width: shape.0,
            height: shape.1,
            orientations: shape.2,
            xi,
            vectors,
        }
    }

    /// The left-invariant frame `𝒜₁ = cos θ ∂x + sin θ ∂y`,
    /// `𝒜₂ = −sin θ ∂x + cos θ ∂y`, `𝒜₃ = ∂θ`.
    pub fn invariant(width: usize, height: usize, orientations: usize) -> Self {
        let dtheta = 2.0 * std::f64::consts::PI / orientations as f64;
        let per_slice: Vec<[[f64; 3]; 3]> = (0..orientations)
            .map(|k| invariant_at(k as f64 * dtheta))
            .collect();
        let mut vectors = Vec::with_capacity(width * height * orientations);
        for frame in per_slice {
            vectors.extend(std::iter::repeat_n(frame, width * height));
        }
        Self::from_vectors((width, height, orientations), 0.1, vectors)
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.orientations)
    }

    /// Stiffness `ξ` of the frame-fitting metric `𝒢_ξ = diag(ξ², ξ², 1)`.
    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn with_xi(mut self, xi: f64) -> Self {
        self.xi = xi;
        self
    }

    #[inline]
    pub fn at(&self, idx: usize) -> &[[f64; 3]; 3] {
        &self.vectors[idx]
    }

    #[inline]
    pub fn vector(&self, idx: usize, i: usize) -> [f64; 3] {
        self.vectors[idx][i]
    }

    pub fn check_grid(&self, v: &Volume) -> Result<()> {
        if self.shape() == v.shape() {
            Ok(())
        } else {
            Err(mismatch(
                format!("{:?}", v.shape()),
                format!("frame {:?}", self.shape()),
            ))
        }
    }

    /// The `𝒢_ξ`-orthonormal triple at a voxel.
    pub fn unit_vectors(&self, idx: usize) -> [[f64; 3]; 3] {
        let f = self.vectors[idx];
        let scale = [1.0 / self.xi, 1.0 / self.xi, 1.0];
        [0, 1, 2].map(|i| f[i].map(|c| c * scale[i]))
    }

    /// Largest deviation of `B_iᵀ M_ξ² B_j` from `δ_ij` over all voxels,
    /// using the unit vectors.
    pub fn orthonormality_error(&self) -> f64 {
        let m2 = [self.xi * self.xi, self.xi * self.xi, 1.0];
        let mut worst: f64 = 0.0;
        for idx in 0..self.vectors.len() {
            let b = self.unit_vectors(idx);
            for i in 0..3 {
                for j in 0..3 {
                    let ip: f64 = (0..3).map(|c| b[i][c] * m2[c] * b[j][c]).sum();
                    let target = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((ip - target).abs());
                }
            }
        }
        worst
    }

    /// Every triple is right-handed and its second vector purely spatial.
    pub fn is_right_handed_and_horizontal(&self, tol: f64) -> bool {
        self.vectors
            .iter()
            .all(|f| det3(f) > 0.0 && f[1][2].abs() <= tol)
    }
}

pub(crate) fn invariant_at(theta: f64) -> [[f64; 3]; 3] {
    let (s, c) = theta.sin_cos();
    [[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]]
}

pub(crate) fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}
