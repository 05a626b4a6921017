use crate::error::{invalid, Result};
use crate::frame::DiagonalMetric;

/// Stiffness of the frame-fitting metric used throughout unless overridden.
pub const DEFAULT_XI: f64 = 0.1;

/// Parameters of the diffusion-shock evolution on the orientation score.
#[derive(Debug, Clone, PartialEq)]
pub struct RdsParams {
    /// Metric of the diffusion term.
    pub metric_d: DiagonalMetric,
    /// Metric of the morphological (shock) term.
    pub metric_m: DiagonalMetric,
    /// Metric of the diffusion/shock switch.
    pub metric_g: DiagonalMetric,
    /// Metric of the dilation/erosion switch.
    pub metric_s: DiagonalMetric,
    /// Charbonnier contrast, in normalised intensity units.
    pub lambda: f64,
    /// Inner regularisation scale of the shock switch (pixels).
    pub sigma: f64,
    /// Outer regularisation scale of the shock switch (pixels).
    pub rho: f64,
    /// Regularisation scale of the diffusion switch (pixels).
    pub nu: f64,
    /// Angular regularisation scale applied alongside every spatial one (radians).
    pub sigma_angular: f64,
    /// Sharpness of the soft sign.
    pub shock_eps: f64,
    pub use_gauge: bool,
    pub xi: f64,
    /// Componentwise smoothing of the Hessian field before frame fitting.
    pub gauge_sigma: f64,
    /// Relative singular value gap below which the invariant frame is kept.
    pub degeneracy_tol: f64,
    /// Steps between recomputations of the switches.
    pub guidance_refresh: usize,
    /// Steps between gauge frame refits.
    pub frame_refresh: usize,
    /// Multiplier on the stable step. Values above one void the max–min
    /// guarantee; they exist to exercise the instability check.
    pub tau_scale: f64,
}

impl Default for RdsParams {
    fn default() -> Self {
        let m = DiagonalMetric::from_anisotropy(DEFAULT_XI, 1.0).expect("valid default metric");
        Self {
            metric_d: m,
            metric_m: m,
            metric_g: m,
            metric_s: m,
            lambda: 0.5,
            sigma: 1.0,
            rho: 1.0,
            nu: 1.0,
            sigma_angular: 0.0,
            shock_eps: 1e-2,
            use_gauge: false,
            xi: DEFAULT_XI,
            gauge_sigma: 1.0,
            degeneracy_tol: 0.05,
            guidance_refresh: 1,
            frame_refresh: 5,
            tau_scale: 1.0,
        }
    }
}

impl RdsParams {
    /// Builds the usual parameterisation: all metrics `g11 = ξ²`,
    /// `g22 = (ξ/ζ)²`, `g33 = 1`, with `ζ = 1` for both switches.
    pub fn with_anisotropy(zeta_d: f64, zeta_m: f64) -> Result<Self> {
        let base = Self::default();
        Ok(Self {
            metric_d: DiagonalMetric::from_anisotropy(base.xi, zeta_d)?,
            metric_m: DiagonalMetric::from_anisotropy(base.xi, zeta_m)?,
            ..base
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(invalid("lambda", "must be positive"));
        }
        if !(self.shock_eps > 0.0) {
            return Err(invalid("shock_eps", "must be positive"));
        }
        if !(self.xi > 0.0) {
            return Err(invalid("xi", "must be positive"));
        }
        for (name, v) in [
            ("sigma", self.sigma),
            ("rho", self.rho),
            ("nu", self.nu),
            ("sigma_angular", self.sigma_angular),
            ("gauge_sigma", self.gauge_sigma),
            ("degeneracy_tol", self.degeneracy_tol),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(name, "must be finite and non-negative"));
            }
        }
        if !(self.tau_scale > 0.0 && self.tau_scale.is_finite()) {
            return Err(invalid("tau_scale", "must be positive and finite"));
        }
        if self.guidance_refresh == 0 || self.frame_refresh == 0 {
            return Err(invalid("refresh", "cadences must be at least one step"));
        }
        Ok(())
    }
}
