use std::fs;
use std::path::Path;

use log::info;
use orient_rds::baseline2d::run_rds2d;
use orient_rds::fixtures::{ridge, ring, spiral, CrossingFixture};
use orient_rds::gauge::{curvature, fit_gauge_frame};
use orient_rds::metrics::{binarize, correlated_noise, dice, dice_loss, precision, psnr_with_mode};
use orient_rds::rds::run_rds_observed;
use orient_rds::{inpaint_relift, lift, project, Image, RdsInput, Volume};

use crate::config::JobConfig;
use crate::error::{CliError, CliResult};
use crate::io;

fn print_grid(v: &Volume) {
    println!(
        "width={} height={} orientations={}",
        v.width(),
        v.height(),
        v.orientations()
    );
}

pub fn lift_cmd(cfg: &JobConfig) -> CliResult<()> {
    let w = cfg.wavelets()?;
    let input = cfg.require(&cfg.input, "input")?;
    let output = cfg.require(&cfg.output, "output")?;
    let v = lift(&io::read_image(&input)?, &w)?;
    io::write_volume(&output, &v)?;
    print_grid(&v);
    Ok(())
}

pub fn project_cmd(cfg: &JobConfig) -> CliResult<()> {
    let input = cfg.require(&cfg.input, "input")?;
    let output = cfg.require(&cfg.output, "output")?;
    let v = io::read_volume(&input)?;
    io::write_png(&output, &project(&v))?;
    print_grid(&v);
    Ok(())
}

pub fn denoise_cmd(cfg: &JobConfig) -> CliResult<()> {
    let w = cfg.wavelets()?;
    let p = cfg.rds_params()?;
    let input = cfg.require(&cfg.input, "input")?;
    let output = cfg.require(&cfg.output, "output")?;
    if cfg.checkpoint_every == 0 {
        return Err(CliError::param("checkpoint_every must be at least one"));
    }
    let mut f = io::read_image(&input)?;
    let mut truth = cfg.truth.as_deref().map(io::read_image).transpose()?;
    if cfg.noise_sigma < 0.0 {
        return Err(CliError::param("noise_sigma must be non-negative"));
    }
    if cfg.noise_sigma > 0.0 {
        let noise = correlated_noise(
            f.width(),
            f.height(),
            cfg.noise_sigma,
            cfg.noise_rho,
            cfg.seed,
        )?;
        let noisy = Image::from_fn(f.width(), f.height(), |x, y| {
            f.get(x, y) + noise.get(x, y) / 255.0
        });
        truth.get_or_insert(f);
        f = noisy;
    }
    if let Some(g) = &truth {
        if !g.same_shape(&f) {
            return Err(CliError::param("truth and input differ in size"));
        }
    }
    let score = |u: &Volume| -> CliResult<Option<f64>> {
        truth
            .as_ref()
            .map(|g| psnr_with_mode(&project(u), g, 1.0, cfg.psnr_mode))
            .transpose()
            .map_err(CliError::from)
    };
    let mut rows = Vec::new();
    let mut last_step = None;
    let mut failure = None;
    let out = run_rds_observed(
        RdsInput::Image(&f, &w),
        &p,
        cfg.t_end,
        None,
        &mut |step, t, s| {
            if failure.is_some() || step % cfg.checkpoint_every != 0 {
                return;
            }
            match score(&s.u) {
                Ok(db) => rows.extend(db.map(|db| (t, db))),
                Err(e) => failure = Some(e),
            }
            last_step = Some(step);
        },
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    if last_step != Some(out.steps) {
        rows.extend(score(&out.volume)?.map(|db| (cfg.t_end, db)));
    }
    for (t, db) in &rows {
        println!("t={t} psnr_db={db}");
    }
    info!("{} steps of tau = {}", out.steps, out.tau);
    if out.gauge.degenerate + out.gauge.svd_failures > 0 {
        info!(
            "gauge fits: {} degenerate, {} failed",
            out.gauge.degenerate, out.gauge.svd_failures
        );
    }
    io::write_png(&output, &out.image)?;
    if let Some(csv) = &cfg.csv {
        if truth.is_none() {
            return Err(CliError::param("a PSNR curve needs `truth`"));
        }
        io::write_csv(csv, &rows)?;
    }
    Ok(())
}

pub fn inpaint_cmd(cfg: &JobConfig) -> CliResult<()> {
    let w = cfg.wavelets()?;
    let p = cfg.rds_params()?;
    let input = cfg.require(&cfg.input, "input")?;
    let output = cfg.require(&cfg.output, "output")?;
    let mask_path = cfg.require(&cfg.mask, "mask")?;
    let f = io::read_image(&input)?;
    let mask = io::read_mask(&mask_path)?;
    if mask.width() != f.width() || mask.height() != f.height() {
        return Err(CliError::param("mask and input differ in size"));
    }
    let out = inpaint_relift(&f, &mask, &w, &p, cfg.t_end, cfg.stages)?;
    io::write_png(&output, &out)?;
    println!("hole_pixels={}", mask.count());
    if let Some(path) = &cfg.baseline_output {
        let planar = run_rds2d(&f, &cfg.baseline_params(), cfg.baseline_t_end, Some(&mask))?;
        io::write_png(path, &planar)?;
    }
    Ok(())
}

/// Compares `input` with the reference in `truth`.
pub fn compare_cmd(cfg: &JobConfig) -> CliResult<()> {
    let input = cfg.require(&cfg.input, "input")?;
    let truth = cfg.require(&cfg.truth, "truth")?;
    let (f, g) = (io::read_image(&input)?, io::read_image(&truth)?);
    let db = psnr_with_mode(&f, &g, 1.0, cfg.psnr_mode)?;
    let (bf, bg) = (binarize(&f), binarize(&g));
    println!("psnr_db={db}");
    println!("dice={}", dice(&bf, &bg, 1e-8)?);
    println!("precision={}", precision(&bf, &bg, 1e-8)?);
    println!("dice_loss={}", dice_loss(&f, &g, 1e-8)?);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FixtureKind {
    Crossing,
    Circle,
    Spiral,
    Ridge,
    Noise,
}

#[derive(Debug, Clone, clap::Args)]
pub struct FixtureArgs {
    #[arg(long, value_enum)]
    pub kind: FixtureKind,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: std::path::PathBuf,
    #[arg(long, default_value_t = 65)]
    pub size: usize,
    /// Ring radius or spiral pitch, in pixels.
    #[arg(long, default_value_t = 20.0)]
    pub radius: f64,
    /// Line width in pixels.
    #[arg(long, default_value_t = 1.2)]
    pub width: f64,
    /// Ridge angle in radians.
    #[arg(long, default_value_t = 0.0)]
    pub angle: f64,
    /// Noise standard deviation on the 0–255 scale.
    #[arg(long, default_value_t = 127.5)]
    pub sigma: f64,
    /// Noise correlation scale in pixels.
    #[arg(long, default_value_t = 2.0)]
    pub rho: f64,
}

pub fn fixtures_cmd(a: &FixtureArgs, seed: u64) -> CliResult<()> {
    fs::create_dir_all(&a.out).map_err(|e| CliError::io(format!("{}: {e}", a.out.display())))?;
    let png = |name: &str, img: &Image| io::write_png(&a.out.join(name), img);
    match a.kind {
        FixtureKind::Crossing => {
            let hole = (a.size.saturating_sub(8) / 4).min(6);
            let fx = CrossingFixture::new(
                a.size,
                [std::f64::consts::PI / 6.0, std::f64::consts::FRAC_PI_2],
                a.width,
                hole,
            )?;
            png("crossing_clean.png", &fx.clean)?;
            png("crossing_damaged.png", &fx.damaged)?;
            png("crossing_mask.png", &io::mask_image(&fx.mask))?;
        }
        FixtureKind::Circle => png("circle.png", &ring(a.size, a.radius, a.width))?,
        FixtureKind::Spiral => png("spiral.png", &spiral(a.size, a.radius, a.width))?,
        FixtureKind::Ridge => png("ridge.png", &ridge(a.size, a.angle, a.width))?,
        FixtureKind::Noise => {
            let noise = correlated_noise(a.size, a.size, a.sigma, a.rho, seed)?;
            let field = Volume::new(a.size, a.size, 1, noise.data().to_vec())?;
            io::write_volume(&a.out.join("noise.vol"), &field)?;
            // the same field on the [0, 1] scale added to a spiral
            let clean = spiral(a.size, a.radius, a.width);
            let noisy = Image::from_fn(a.size, a.size, |x, y| {
                clean.get(x, y) + noise.get(x, y) / 255.0
            });
            png("spiral_clean.png", &clean)?;
            png("spiral_noisy.png", &noisy)?;
        }
    }
    Ok(())
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Fits a gauge frame and reports its health; `input` may be a volume or an
/// image to lift first.
pub fn gauge_diag_cmd(cfg: &JobConfig) -> CliResult<()> {
    let input = cfg.require(&cfg.input, "input")?;
    let v = load_volume_or_lift(&input, cfg)?;
    let (frame, diag) = fit_gauge_frame(&v, cfg.xi, cfg.gauge_sigma, cfg.degeneracy_tol)?;
    let kappa: Vec<f64> = (0..v.len()).map(|i| curvature(&frame, i)).collect();
    // strongest responses: the arg-max orientation at each position
    let slice = v.slice_len();
    let ridge_kappa: Vec<f64> = (0..slice)
        .map(|p| {
            let k = (0..v.orientations())
                .max_by(|&a, &b| v.data()[p + a * slice].total_cmp(&v.data()[p + b * slice]))
                .unwrap_or(0);
            kappa[p + k * slice].abs()
        })
        .collect();
    print_grid(&v);
    println!("degenerate={}", diag.degenerate);
    println!("svd_failures={}", diag.svd_failures);
    println!("orthonormality_error={:e}", frame.orthonormality_error());
    println!("median_abs_curvature_argmax={}", median(ridge_kappa));
    if let Some(out) = &cfg.output {
        io::write_volume(
            out,
            &Volume::new(v.width(), v.height(), v.orientations(), kappa)?,
        )?;
    }
    Ok(())
}

fn load_volume_or_lift(path: &Path, cfg: &JobConfig) -> CliResult<Volume> {
    if io::is_volume_file(path)? {
        let v = io::read_volume(path)?;
        if cfg.quarter_turn && v.orientations() % 4 != 0 {
            return Err(CliError::param(
                "quarter_turn needs orientations divisible by 4",
            ));
        }
        Ok(v)
    } else {
        Ok(lift(&io::read_image(path)?, &cfg.wavelets()?)?)
    }
}
