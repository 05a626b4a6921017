//! Diffusion-shock evolution on the orientation score.
//!
//! One explicit Euler step reads
//!
//! ```text
//! U ← U + τ · ( g · Δ_{𝒢_D} U  −  (1 − g) · s · ‖∇_{𝒢_M} U‖ )
//! ```
//!
//! with the diffusion/shock switch `g ∈ (0, 1]` and the dilation/erosion
//! switch `s ∈ [−1, 1]`. For `τ` below [`stable_timestep`] the update is a
//! convex combination of neighbouring samples, so the range of the initial
//! data is never left.

use rayon::prelude::*;

use crate::diffops::{
    gaussian_regularize, gradient_norm_central, invariant_frame, perpendicular_laplacian, Axis,
    Morphology, Stencil,
};
use crate::error::{invalid, RdsError, Result};
use crate::frame::{stencil_steps, FrameField};
use crate::gauge::{fit_gauge_frame, GaugeDiagnostics};
use crate::grid::{min_max, Image, Mask, Volume};
use crate::lift::{lift, project, WaveletStack};
use crate::params::RdsParams;

/// Charbonnier weight `1 / sqrt(1 + s2/λ²)`.
#[inline]
pub fn charbonnier(s2: f64, lambda: f64) -> f64 {
    1.0 / (1.0 + s2 / (lambda * lambda)).sqrt()
}

/// Soft sign `x / sqrt(x² + ε²)`.
#[inline]
pub fn shock_sigmoid(x: f64, eps: f64) -> f64 {
    x / (x * x + eps * eps).sqrt()
}

/// The two time step limits: diffusion `τ_D` and shock `τ_S`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimestepBounds {
    pub diffusion: f64,
    pub shock: f64,
}

impl TimestepBounds {
    pub fn min(&self) -> f64 {
        self.diffusion.min(self.shock)
    }
}

/// `τ_D⁻¹ = 2((g_D^{11} + g_D^{22})/Δxy² + g_D^{33}/Δθ²)` and
/// `τ_S⁻¹ = sqrt((g_M^{11} + g_M^{22})/Δxy² + g_S^{33}/Δθ²)`.
pub fn timestep_bounds(p: &RdsParams, dxy: f64, dtheta: f64) -> TimestepBounds {
    let d = p.metric_d.dual();
    let m = p.metric_m.dual();
    let s = p.metric_s.dual();
    let inv_d = 2.0 * ((d[0] + d[1]) / (dxy * dxy) + d[2] / (dtheta * dtheta));
    let inv_s = ((m[0] + m[1]) / (dxy * dxy) + s[2] / (dtheta * dtheta)).sqrt();
    TimestepBounds {
        diffusion: 1.0 / inv_d,
        shock: 1.0 / inv_s,
    }
}

/// Largest time step that keeps the explicit scheme range-preserving.
pub fn stable_timestep(p: &RdsParams, dxy: f64, dtheta: f64) -> f64 {
    timestep_bounds(p, dxy, dtheta).min()
}

/// The diffusion/shock switch `g` and the dilation/erosion switch `s`.
pub fn compute_guidance(u: &Volume, frame: &FrameField, p: &RdsParams) -> Result<(Volume, Volume)> {
    frame.check_grid(u)?;
    let u_nu = gaussian_regularize(u, p.nu, p.sigma_angular);
    let grad = gradient_norm_central(&u_nu, frame, &p.metric_g)?;
    let g = grad.map(|q| charbonnier(q * q, p.lambda));

    let u_sigma = gaussian_regularize(u, p.sigma, p.sigma_angular);
    let perp = perpendicular_laplacian(&u_sigma, frame, &p.metric_s)?;
    let eps = p.shock_eps;
    let s = gaussian_regularize(&perp.map(|x| shock_sigmoid(x, eps)), p.rho, p.sigma_angular)
        .map(|x| x.clamp(-1.0, 1.0));
    Ok((g, s))
}

/// Evolving state of the explicit scheme.
#[derive(Debug, Clone)]
pub struct RdsState {
    pub u: Volume,
    pub u0: Volume,
    pub frame: FrameField,
    pub g_switch: Volume,
    pub s_switch: Volume,
    pub step_count: usize,
    pub tau: f64,
    mask: Option<Vec<bool>>,
    bounds: (f64, f64),
}

impl RdsState {
    /// Starts from `u0`; cells where `mask` is `false` stay at `u0`.
    pub fn new(
        u0: Volume,
        frame: FrameField,
        mask: Option<&Mask>,
        p: &RdsParams,
        tau: f64,
    ) -> Result<Self> {
        p.validate()?;
        frame.check_grid(&u0)?;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(invalid(
                "tau",
                format!("must be positive and finite, got {tau}"),
            ));
        }
        let mask = mask
            .map(|m| m.for_volume(&u0).map(|m| m.data().to_vec()))
            .transpose()?;
        let (g_switch, s_switch) = compute_guidance(&u0, &frame, p)?;
        let bounds = u0.min_max();
        Ok(Self {
            u: u0.clone(),
            u0,
            frame,
            g_switch,
            s_switch,
            step_count: 0,
            tau,
            mask,
            bounds,
        })
    }

    /// Range of the initial data that every step must respect.
    pub fn bounds(&self) -> (f64, f64) {
        self.bounds
    }

    pub fn is_clamped(&self, idx: usize) -> bool {
        self.mask.as_ref().is_some_and(|m| !m[idx])
    }
}

/// The right-hand side at every voxel given precomputed switches.
fn evolution_rate(
    u: &Volume,
    frame: &FrameField,
    g: &Volume,
    s: &Volume,
    p: &RdsParams,
) -> Result<Vec<f64>> {
    let st = Stencil::new(u, frame)?;
    let dual_d = p.metric_d.dual();
    let dual_m = p.metric_m.dual();
    let (gd, sd) = (g.data(), s.data());
    Ok((0..u.len())
        .into_par_iter()
        .map(|idx| {
            let gi = gd[idx];
            let si = sd[idx];
            let mode = if si < 0.0 {
                Some(Morphology::Dilation)
            } else if si > 0.0 {
                Some(Morphology::Erosion)
            } else {
                None
            };
            let mut lap = 0.0;
            let mut grad2 = 0.0;
            for a in Axis::ALL {
                let i = a.index();
                if dual_d[i] == 0.0 && (dual_m[i] == 0.0 || mode.is_none()) {
                    continue;
                }
                let (c, f, b) = st.samples(idx, a);
                let h = st.step(a);
                lap += dual_d[i] * (f - 2.0 * c + b) / (h * h);
                if let Some(mode) = mode {
                    let d = match mode {
                        Morphology::Dilation => (f - c).max(b - c),
                        Morphology::Erosion => (c - f).max(c - b),
                    }
                    .max(0.0)
                        / h;
                    grad2 += dual_m[i] * d * d;
                }
            }
            gi * lap - (1.0 - gi) * si * grad2.sqrt()
        })
        .collect())
}

/// One explicit Euler step. Switches are refreshed every
/// `p.guidance_refresh` steps; the state is consumed and returned.
pub fn rds_step(mut state: RdsState, p: &RdsParams) -> Result<RdsState> {
    if state.step_count > 0 && state.step_count.is_multiple_of(p.guidance_refresh) {
        let (g, s) = compute_guidance(&state.u, &state.frame, p)?;
        state.g_switch = g;
        state.s_switch = s;
    }
    let rate = evolution_rate(&state.u, &state.frame, &state.g_switch, &state.s_switch, p)?;
    let tau = state.tau;
    let u0 = state.u0.data();
    let mask = state.mask.as_deref();
    state
        .u
        .data_mut()
        .par_iter_mut()
        .enumerate()
        .for_each(|(idx, val)| {
            if mask.is_some_and(|m| !m[idx]) {
                *val = u0[idx];
            } else {
                *val += tau * rate[idx];
            }
        });
    state.step_count += 1;

    let (lo, hi) = state.bounds;
    let slack = 1e-6 * (hi - lo).max(f64::MIN_POSITIVE);
    let (min, max) = min_max(state.u.data());
    if !(min >= lo - slack && max <= hi + slack) {
        return Err(RdsError::Instability {
            step: state.step_count,
            tau,
            lo,
            hi,
            min,
            max,
        });
    }
    Ok(state)
}

/// Initial data of a run.
#[derive(Debug, Clone, Copy)]
pub enum RdsInput<'a> {
    /// An image, lifted with the given wavelets.
    Image(&'a Image, &'a WaveletStack),
    /// An orientation score used as is.
    Volume(&'a Volume),
}

/// Result of [`run_rds`].
#[derive(Debug, Clone)]
pub struct RdsOutput {
    pub volume: Volume,
    pub image: Image,
    pub steps: usize,
    pub tau: f64,
    pub gauge: GaugeDiagnostics,
}

/// Time-stepping callback: `(step, time, state)`.
pub type Observer<'a> = dyn FnMut(usize, f64, &RdsState) + 'a;

/// Evolves to time `t_end` with `⌈t_end/τ⌉` steps of at most the stable
/// step size.
pub fn run_rds(
    input: RdsInput<'_>,
    p: &RdsParams,
    t_end: f64,
    mask: Option<&Mask>,
) -> Result<RdsOutput> {
    run_rds_observed(input, p, t_end, mask, &mut |_, _, _| {})
}

/// [`run_rds`] with a callback after every step (and once at `t = 0`).
pub fn run_rds_observed(
    input: RdsInput<'_>,
    p: &RdsParams,
    t_end: f64,
    mask: Option<&Mask>,
    observer: &mut Observer<'_>,
) -> Result<RdsOutput> {
    p.validate()?;
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(invalid(
            "t_end",
            format!("must be finite and non-negative, got {t_end}"),
        ));
    }
    let u0 = match input {
        RdsInput::Image(f, w) => {
            if let Some(m) = mask {
                m.check_image(f)?;
            }
            lift(f, w)?
        }
        RdsInput::Volume(v) => v.clone(),
    };
    let steps_ = stencil_steps(1.0, u0.dtheta());
    let tau_max = stable_timestep(p, steps_[0], steps_[2]) * p.tau_scale;
    let mut gauge = GaugeDiagnostics::default();
    let fit = |u: &Volume, gauge: &mut GaugeDiagnostics| -> Result<FrameField> {
        if p.use_gauge {
            let (f, d) = fit_gauge_frame(u, p.xi, p.gauge_sigma, p.degeneracy_tol)?;
            gauge.degenerate += d.degenerate;
            gauge.svd_failures += d.svd_failures;
            Ok(f)
        } else {
            Ok(invariant_frame(u))
        }
    };
    let frame = fit(&u0, &mut gauge)?;
    let mut state = RdsState::new(
        u0,
        frame,
        mask,
        p,
        tau_max.min(t_end.max(f64::MIN_POSITIVE)),
    )?;
    observer(0, 0.0, &state);

    let mut t = 0.0;
    let tol = 1e-12 * t_end;
    while t_end - t > tol {
        let tau = tau_max.min(t_end - t);
        state.tau = tau;
        if p.use_gauge && state.step_count > 0 && state.step_count % p.frame_refresh == 0 {
            state.frame = fit(&state.u, &mut gauge)?;
        }
        state = rds_step(state, p)?;
        t += tau;
        observer(state.step_count, t, &state);
    }
    let image = project(&state.u);
    Ok(RdsOutput {
        image,
        steps: state.step_count,
        tau: tau_max,
        volume: state.u,
        gauge,
    })
}

/// Inpaints the pixels where `mask` is `true` in `stages` rounds of lift,
/// evolve for `t_end / stages`, project and paste back.
///
/// Re-lifting matters because the clamped voxels around a hole are the lift
/// of the damaged image, whose wavelet tails already carry the hole's flat
/// fill. Each round re-lifts the current composite so that the held boundary
/// data improves along with the interior. Known pixels are returned
/// unchanged.
pub fn inpaint_relift(
    f: &Image,
    mask: &Mask,
    w: &WaveletStack,
    p: &RdsParams,
    t_end: f64,
    stages: usize,
) -> Result<Image> {
    mask.check_image(f)?;
    if stages == 0 {
        return Err(invalid("stages", "need at least one stage"));
    }
    let dt = t_end / stages as f64;
    let mut cur = f.clone();
    for _ in 0..stages {
        let out = run_rds(RdsInput::Image(&cur, w), p, dt, Some(mask))?;
        for ((v, &new), &hole) in cur
            .data_mut()
            .iter_mut()
            .zip(out.image.data())
            .zip(mask.data())
        {
            if hole {
                *v = new;
            }
        }
    }
    Ok(cur)
}
