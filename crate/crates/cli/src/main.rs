mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::FixtureArgs;
use config::JobConfig;
use error::{CliError, CliResult};

/// Crossing-preserving diffusion-shock filtering on orientation scores.
///
/// Every job reads an optional flat `key = value` config file; `--set`
/// overrides single keys and the dedicated flags override both.
#[derive(Debug, Parser)]
#[command(name = "orient-rds", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Lift an image to an orientation score volume.
    Lift(Io),
    /// Sum a volume over orientations and write a PNG.
    Project(Io),
    /// Lift, evolve and project an image.
    Denoise(Io),
    /// Fill the masked pixels of an image.
    Inpaint(Io),
    /// PSNR, Dice and precision of `input` against `--truth`.
    Compare(Job),
    /// Write synthetic test images.
    Fixtures {
        #[command(flatten)]
        args: FixtureArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fit a gauge frame and report degeneracies and curvature.
    GaugeDiag(Io),
    /// Print the effective configuration.
    Config(Job),
}

#[derive(Debug, Args)]
struct Io {
    input: Option<PathBuf>,
    output: Option<PathBuf>,
    #[command(flatten)]
    job: Job,
}

#[derive(Debug, Args)]
struct Job {
    /// Config file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set lambda=0.1`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long = "input", id = "input_flag")]
    input: Option<PathBuf>,
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    baseline_output: Option<PathBuf>,
    #[arg(long, short = 'k')]
    orientations: Option<usize>,
    /// Final evolution time.
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Evolve in the fitted gauge frame.
    #[arg(long)]
    gauge: bool,
    /// Require `4 | K` for exact quarter-turn equivariance.
    #[arg(long)]
    quarter_turn: bool,
    #[arg(long)]
    seed: Option<u64>,
}

impl Job {
    fn resolve(&self, input: Option<PathBuf>, output: Option<PathBuf>) -> CliResult<JobConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
                JobConfig::parse(&text)?
            }
            None => JobConfig::default(),
        };
        cfg.apply_overrides(&self.overrides)?;
        let paths = [
            (&mut cfg.input, input.or_else(|| self.input.clone())),
            (&mut cfg.output, output),
            (&mut cfg.mask, self.mask.clone()),
            (&mut cfg.truth, self.truth.clone()),
            (&mut cfg.csv, self.csv.clone()),
            (&mut cfg.baseline_output, self.baseline_output.clone()),
        ];
        for (slot, value) in paths {
            if value.is_some() {
                *slot = value;
            }
        }
        if let Some(k) = self.orientations {
            cfg.orientations = k;
        }
        if let Some(t) = self.t_end {
            if !(t.is_finite() && t >= 0.0) {
                return Err(CliError::param(format!(
                    "t_end must be finite and non-negative, got {t}"
                )));
            }
            cfg.t_end = t;
        }
        if let Some(l) = self.lambda {
            cfg.lambda = l;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.use_gauge |= self.gauge;
        cfg.quarter_turn |= self.quarter_turn;
        Ok(cfg)
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("ORIENT_RDS_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::param(format!(
            "ORIENT_RDS_THREADS must be a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::param(e.to_string()))
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Lift(a) => commands::lift_cmd(&a.job.resolve(a.input, a.output)?),
        Command::Project(a) => commands::project_cmd(&a.job.resolve(a.input, a.output)?),
        Command::Denoise(a) => commands::denoise_cmd(&a.job.resolve(a.input, a.output)?),
        Command::Inpaint(a) => commands::inpaint_cmd(&a.job.resolve(a.input, a.output)?),
        Command::GaugeDiag(a) => commands::gauge_diag_cmd(&a.job.resolve(a.input, a.output)?),
        Command::Compare(job) => commands::compare_cmd(&job.resolve(None, None)?),
        Command::Fixtures { args, seed } => commands::fixtures_cmd(&args, seed),
        Command::Config(job) => {
            print!("{}", job.resolve(None, None)?.serialize());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
