//! Forward evaluation of the gated diffusion-shock layer.
//!
//! Diffusion, dilation and erosion are each run for a fixed time `T` and
//! mixed per voxel by a diffusion/shock gate `Φ^g` and a dilation/erosion
//! gate `Φ^S`:
//!
//! ```text
//! Φ(U) = Φ^g·Φ^dif(U)
//!      + (1−Φ^g)·|Φ^S|·(Φ^dil(U)·𝟙{Φ^S<0} − Φ^dil(−U)·𝟙{Φ^S>0})
//!      + (1−Φ^g)·(1−|Φ^S|)·U
//! ```

use rayon::prelude::*;

use crate::diffops::{gradient_norm_central, map_voxels, Axis, Morphology, Stencil};
use crate::error::{invalid, Result};
use crate::frame::{stencil_steps, DiagonalMetric, FrameField};
use crate::grid::Volume;
use crate::rds::{charbonnier, shock_sigmoid};

/// Which Laplacian drives the dilation/erosion gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShockGate {
    /// `Δ_{𝒢_S}` over all three directions.
    #[default]
    Full,
    /// Only the two directions across the local orientation.
    Perpendicular,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub metric_d: DiagonalMetric,
    pub metric_m: DiagonalMetric,
    pub metric_g: DiagonalMetric,
    pub metric_s: DiagonalMetric,
    pub lambda: f64,
    pub eps: f64,
    /// Evolution time of every solution operator.
    pub t: f64,
    /// Exponent of the dilation Hamiltonian `‖∇U‖^{2α}`, in `(1/2, 1]`.
    pub alpha: f64,
    pub shock_gate: ShockGate,
}

impl Default for LayerParams {
    fn default() -> Self {
        let m = DiagonalMetric::from_anisotropy(crate::params::DEFAULT_XI, 1.0)
            .expect("valid default metric");
        Self {
            metric_d: m,
            metric_m: m,
            metric_g: m,
            metric_s: m,
            lambda: 0.5,
            eps: 0.1,
            t: 0.05,
            alpha: 1.0,
            shock_gate: ShockGate::Full,
        }
    }
}

impl LayerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(invalid("t", "must be positive"));
        }
        if !(self.alpha > 0.5 && self.alpha <= 1.0) {
            return Err(invalid(
                "alpha",
                format!("must lie in (1/2, 1], got {}", self.alpha),
            ));
        }
        if !(self.lambda > 0.0) || !(self.eps > 0.0) {
            return Err(invalid("gates", "lambda and eps must be positive"));
        }
        Ok(())
    }
}

fn steps_for(v: &Volume) -> [f64; 3] {
    stencil_steps(1.0, v.dtheta())
}

/// Solution of `∂_t U = Δ_𝒢 U` at time `t`, by `⌈t/τ_D⌉` explicit steps.
pub fn phi_dif(u: &Volume, frame: &FrameField, m: &DiagonalMetric, t: f64) -> Result<Volume> {
    frame.check_grid(u)?;
    if !(t >= 0.0) {
        return Err(invalid("t", "must be non-negative"));
    }
    let d = m.dual();
    let h = steps_for(u);
    let inv = 2.0 * (d[0] / (h[0] * h[0]) + d[1] / (h[1] * h[1]) + d[2] / (h[2] * h[2]));
    if t == 0.0 || inv == 0.0 {
        return Ok(u.clone());
    }
    let n = (t * inv).ceil().max(1.0) as usize;
    let tau = t / n as f64;
    let mut cur = u.clone();
    for _ in 0..n {
        let st = Stencil::new(&cur, frame)?;
        let next = map_voxels(&cur, |i| {
            cur.data()[i] + tau * st.laplacian(i, d, &Axis::ALL)
        });
        cur = next;
    }
    Ok(cur)
}

/// Solution of `∂_t U = ‖∇_𝒢 U‖^{2α}` at time `t` with an upwind scheme.
///
/// The step size is `τ_S` reduced where steep gradients would otherwise
/// break monotonicity of the `2α`-power, so values only grow and never
/// exceed the initial maximum.
pub fn phi_dil(
    u: &Volume,
    frame: &FrameField,
    m: &DiagonalMetric,
    t: f64,
    alpha: f64,
) -> Result<Volume> {
    frame.check_grid(u)?;
    if !(t >= 0.0) {
        return Err(invalid("t", "must be non-negative"));
    }
    if !(alpha > 0.5 && alpha <= 1.0) {
        return Err(invalid(
            "alpha",
            format!("must lie in (1/2, 1], got {alpha}"),
        ));
    }
    let d = m.dual();
    let h = steps_for(u);
    let lip = (d[0] / (h[0] * h[0]) + d[1] / (h[1] * h[1]) + d[2] / (h[2] * h[2])).sqrt();
    if t == 0.0 || lip == 0.0 {
        return Ok(u.clone());
    }
    let tau_s = 1.0 / lip;
    let power = 2.0 * alpha;
    let mut cur = u.clone();
    let mut elapsed = 0.0;
    while t - elapsed > 1e-12 * t {
        let st = Stencil::new(&cur, frame)?;
        let grad: Vec<f64> = (0..cur.len())
            .into_par_iter()
            .map(|i| st.gradient_norm_upwind(i, d, Morphology::Dilation))
            .collect();
        let qmax = grad.iter().cloned().fold(0.0, f64::max);
        if qmax == 0.0 {
            break;
        }
        let slope = power * qmax.max(1.0).powf(power - 1.0);
        let tau = (tau_s / slope).min(t - elapsed);
        let data: Vec<f64> = cur
            .data()
            .par_iter()
            .zip(&grad)
            .map(|(&v, &q)| v + tau * q.powf(power))
            .collect();
        cur = Volume::new(cur.width(), cur.height(), cur.orientations(), data)?;
        elapsed += tau;
    }
    Ok(cur)
}

/// Erosion by duality: `−Φ^dil(−U)`.
pub fn phi_ero(
    u: &Volume,
    frame: &FrameField,
    m: &DiagonalMetric,
    t: f64,
    alpha: f64,
) -> Result<Volume> {
    Ok(phi_dil(&u.map(|x| -x), frame, m, t, alpha)?.map(|x| -x))
}

/// Everything the layer computes on the way to its output.
#[derive(Debug, Clone)]
pub struct GatedComponents {
    pub gate_g: Volume,
    pub gate_s: Volume,
    pub diffused: Volume,
    pub dilated: Volume,
    pub eroded: Volume,
    pub output: Volume,
}

/// Per-voxel mixing weights `(w_dif, w_shock, w_identity)`.
#[inline]
pub fn gate_weights(g: f64, s: f64) -> (f64, f64, f64) {
    let shock = if s != 0.0 { (1.0 - g) * s.abs() } else { 0.0 };
    (g, shock, (1.0 - g) * (1.0 - s.abs()))
}

/// Mixes precomputed solution operators with the given gates.
pub fn combine(
    u: &Volume,
    diffused: &Volume,
    dilated: &Volume,
    eroded: &Volume,
    gate_g: &Volume,
    gate_s: &Volume,
) -> Result<Volume> {
    for other in [diffused, dilated, eroded, gate_g, gate_s] {
        u.check_shape(other)?;
    }
    let data = (0..u.len())
        .into_par_iter()
        .map(|i| {
            let g = gate_g.data()[i];
            let s = gate_s.data()[i];
            let (w_dif, w_shock, w_id) = gate_weights(g, s);
            let shock = if s < 0.0 {
                dilated.data()[i]
            } else if s > 0.0 {
                eroded.data()[i]
            } else {
                0.0
            };
            w_dif * diffused.data()[i] + w_shock * shock + w_id * u.data()[i]
        })
        .collect();
    Ok(u.with_data(data))
}

/// Runs the layer and returns every intermediate field.
pub fn gated_rds_components(
    u: &Volume,
    frame: &FrameField,
    p: &LayerParams,
) -> Result<GatedComponents> {
    p.validate()?;
    frame.check_grid(u)?;
    let grad = gradient_norm_central(u, frame, &p.metric_g)?;
    let gate_g = phi_dif(&grad, frame, &p.metric_g, p.t)?.map(|q| charbonnier(q * q, p.lambda));

    let smooth = phi_dif(u, frame, &p.metric_s, p.t)?;
    let st = Stencil::new(&smooth, frame)?;
    let ds = p.metric_s.dual();
    let axes: &[Axis] = match p.shock_gate {
        ShockGate::Full => &Axis::ALL,
        ShockGate::Perpendicular => &[Axis::Lateral, Axis::Angular],
    };
    let eps = p.eps;
    let gate_s = map_voxels(&smooth, |i| shock_sigmoid(st.laplacian(i, ds, axes), eps));

    let diffused = phi_dif(u, frame, &p.metric_d, p.t)?;
    let dilated = phi_dil(u, frame, &p.metric_m, p.t, p.alpha)?;
    let eroded = phi_ero(u, frame, &p.metric_m, p.t, p.alpha)?;
    let output = combine(u, &diffused, &dilated, &eroded, &gate_g, &gate_s)?;
    Ok(GatedComponents {
        gate_g,
        gate_s,
        diffused,
        dilated,
        eroded,
        output,
    })
}

/// The layer's output.
pub fn gated_rds_apply(u: &Volume, frame: &FrameField, p: &LayerParams) -> Result<Volume> {
    Ok(gated_rds_components(u, frame, p)?.output)
}
