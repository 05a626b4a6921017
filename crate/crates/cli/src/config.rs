//! Flat `key = value` job configuration.
//!
//! Every key has a fixed type and a default. Parsing rejects unknown and
//! repeated keys; [`JobConfig::serialize`] writes every key in a fixed
//! order, so serialising a parsed file is idempotent.

use std::fmt::Write as _;
use std::path::PathBuf;

use orient_rds::baseline2d::Rds2dParams;
use orient_rds::metrics::PsnrMode;
use orient_rds::{build_cake_wavelets, DiagonalMetric, RdsParams, WaveletStack};

use crate::error::{CliError, CliResult};

trait ConfigValue: Sized {
    fn parse_value(s: &str) -> Result<Self, String>;
    fn format_value(&self) -> String;
}

macro_rules! plain_value {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn parse_value(s: &str) -> Result<Self, String> {
                s.parse().map_err(|e| format!("{e}"))
            }
            fn format_value(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

plain_value!(usize, u64, bool);

impl ConfigValue for f64 {
    fn parse_value(s: &str) -> Result<Self, String> {
        let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err("must be finite".into())
        }
    }
    fn format_value(&self) -> String {
        // `{:?}` is the shortest representation that reads back exactly
        format!("{self:?}")
    }
}

impl ConfigValue for Option<PathBuf> {
    fn parse_value(s: &str) -> Result<Self, String> {
        Ok((!s.is_empty()).then(|| PathBuf::from(s)))
    }
    fn format_value(&self) -> String {
        self.as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_default()
    }
}

impl ConfigValue for PsnrMode {
    fn parse_value(s: &str) -> Result<Self, String> {
        match s {
            "standard" => Ok(PsnrMode::Standard),
            "literal" => Ok(PsnrMode::Literal),
            _ => Err("expected `standard` or `literal`".into()),
        }
    }
    fn format_value(&self) -> String {
        match self {
            PsnrMode::Standard => "standard",
            PsnrMode::Literal => "literal",
        }
        .into()
    }
}

macro_rules! job_config {
    ($($(#[doc = $doc:literal])* $key:ident: $t:ty = $default:expr,)*) => {
        #[derive(Debug, Clone, PartialEq)]
        pub struct JobConfig {
            $($(#[doc = $doc])* pub $key: $t,)*
        }

        impl Default for JobConfig {
            fn default() -> Self {
                Self { $($key: $default,)* }
            }
        }

        impl JobConfig {
            pub const KEYS: &'static [&'static str] = &[$(stringify!($key)),*];

            /// Assigns one key from its textual value.
            pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
                let value = value.trim();
                match key {
                    $(stringify!($key) => {
                        self.$key = <$t as ConfigValue>::parse_value(value).map_err(|e| {
                            CliError::param(format!("bad value `{value}` for `{key}`: {e}"))
                        })?;
                    })*
                    _ => {
                        return Err(CliError::param(format!(
                            "unknown config key `{key}`; known keys: {}",
                            Self::KEYS.join(", ")
                        )))
                    }
                }
                Ok(())
            }

            fn entries(&self) -> Vec<(&'static str, String)> {
                vec![$((stringify!($key), self.$key.format_value())),*]
            }
        }
    };
}

job_config! {
    /// Input image or volume.
    input: Option<PathBuf> = None,
    output: Option<PathBuf> = None,
    /// Inpainting mask; pixels ≥ 0.5 may change.
    mask: Option<PathBuf> = None,
    /// Ground truth for PSNR curves.
    truth: Option<PathBuf> = None,
    /// Destination of the `t,psnr_db` curve.
    csv: Option<PathBuf> = None,
    /// Where the planar baseline result goes, if anywhere.
    baseline_output: Option<PathBuf> = None,
    orientations: usize = 32,
    wavelet_size: usize = 31,
    wavelet_order: usize = 3,
    wavelet_inflection: f64 = 0.8,
    /// Demand `4 | K` so that quarter turns act exactly on the grid.
    quarter_turn: bool = false,
    t_end: f64 = 1.0,
    lambda: f64 = 0.5,
    sigma: f64 = 1.0,
    rho: f64 = 1.0,
    nu: f64 = 1.0,
    sigma_angular: f64 = 0.0,
    shock_eps: f64 = 0.01,
    xi: f64 = 0.1,
    zeta_d: f64 = 1.0,
    zeta_m: f64 = 1.0,
    zeta_g: f64 = 1.0,
    zeta_s: f64 = 1.0,
    use_gauge: bool = false,
    gauge_sigma: f64 = 1.0,
    degeneracy_tol: f64 = 0.05,
    guidance_refresh: usize = 1,
    frame_refresh: usize = 5,
    tau_scale: f64 = 1.0,
    /// Steps between PSNR checkpoints.
    checkpoint_every: usize = 10,
    /// Re-lift stages of inpainting.
    stages: usize = 60,
    baseline_lambda: f64 = 0.05,
    baseline_rho: f64 = 2.0,
    baseline_t_end: f64 = 50.0,
    psnr_mode: PsnrMode = PsnrMode::Standard,
    /// Standard deviation (0–255 scale) of correlated noise added to the
    /// input before denoising; the clean input then serves as truth.
    noise_sigma: f64 = 0.0,
    noise_rho: f64 = 2.0,
    seed: u64 = 0,
}

impl JobConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut cfg = Self::default();
        let mut seen = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::param(format!("line {}: expected `key = value`", n + 1))
            })?;
            let key = key.trim();
            if seen.contains(&key) {
                return Err(CliError::param(format!("line {}: `{key}` repeated", n + 1)));
            }
            seen.push(key);
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Applies `key=value` overrides.
    pub fn apply_overrides(&mut self, pairs: &[String]) -> CliResult<()> {
        for pair in pairs {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| CliError::param(format!("expected key=value, got `{pair}`")))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn require(&self, path: &Option<PathBuf>, key: &str) -> CliResult<PathBuf> {
        path.clone()
            .ok_or_else(|| CliError::param(format!("`{key}` is required")))
    }

    pub fn check_orientations(&self) -> CliResult<()> {
        if self.quarter_turn && !self.orientations.is_multiple_of(4) {
            return Err(CliError::param(format!(
                "quarter_turn needs orientations divisible by 4, got {}",
                self.orientations
            )));
        }
        Ok(())
    }

    pub fn wavelets(&self) -> CliResult<WaveletStack> {
        self.check_orientations()?;
        Ok(build_cake_wavelets(
            self.orientations,
            self.wavelet_size,
            self.wavelet_order,
            self.wavelet_inflection,
        )?)
    }

    pub fn rds_params(&self) -> CliResult<RdsParams> {
        let metric = |zeta| DiagonalMetric::from_anisotropy(self.xi, zeta);
        let p = RdsParams {
            metric_d: metric(self.zeta_d)?,
            metric_m: metric(self.zeta_m)?,
            metric_g: metric(self.zeta_g)?,
            metric_s: metric(self.zeta_s)?,
            lambda: self.lambda,
            sigma: self.sigma,
            rho: self.rho,
            nu: self.nu,
            sigma_angular: self.sigma_angular,
            shock_eps: self.shock_eps,
            use_gauge: self.use_gauge,
            xi: self.xi,
            gauge_sigma: self.gauge_sigma,
            degeneracy_tol: self.degeneracy_tol,
            guidance_refresh: self.guidance_refresh,
            frame_refresh: self.frame_refresh,
            tau_scale: self.tau_scale,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn baseline_params(&self) -> Rds2dParams {
        Rds2dParams {
            lambda: self.baseline_lambda,
            rho: self.baseline_rho,
            ..Rds2dParams::default()
        }
    }
}
