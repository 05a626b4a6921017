//! Crossing-preserving diffusion-shock filtering on the space of positions
//! and orientations `ℝ² × S¹`.
//!
//! An image is lifted to an orientation score with cake wavelets
//! ([`lift`]), evolved by a regularised diffusion-shock PDE expressed in the
//! left-invariant or a data-adapted gauge frame ([`rds`]), and projected
//! back by summing over orientations. The planar scheme ([`baseline2d`]),
//! the gated layer forward operator ([`layer`]) and evaluation metrics
//! ([`metrics`]) complete the toolkit.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline2d;
pub mod diffops;
pub mod error;
pub mod filter;
pub mod fixtures;
pub mod frame;
pub mod gauge;
pub mod grid;
pub mod layer;
pub mod lift;
pub mod metrics;
pub mod params;
pub mod rds;

pub use diffops::{Axis, Morphology};
pub use error::{RdsError, Result};
pub use frame::{DiagonalMetric, FrameField};
pub use grid::{reflect_spatial, trilinear_sample, wrap_orientation, Image, Mask, Volume};
pub use lift::{build_cake_wavelets, lift, project, WaveletStack};
pub use params::RdsParams;
pub use rds::{inpaint_relift, run_rds, stable_timestep, RdsInput, RdsOutput, RdsState};
