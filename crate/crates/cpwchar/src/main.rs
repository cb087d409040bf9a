use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context as _, Result};
use clap::{Parser, Subcommand};
use cpwchar::commands::{self, Context, GammaSource};
use cpwchar::RunConfig;
use cpwchar_core::extraction::FIXTURE_REFERENCE;
use cpwchar_core::MaterialParams;

#[derive(Parser)]
#[command(name = "cpwchar", version, about = "Machine-learning material characterization of printed coplanar waveguides")]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Root seed, overriding the configuration.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads for the model search (0 = all cores).
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    workers: usize,
    /// Validate inputs and report what would be done without writing files.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the forward model into the training dataset CSV.
    Generate,
    /// Search and fit one model per material parameter.
    Train {
        /// Dataset CSV; defaults to the run directory's dataset.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Extract the propagation constant from a set of line measurements.
    Gamma {
        /// Line measurement as `FILE.s2p=LENGTH_M`; give at least two.
        #[arg(long = "line", value_name = "FILE=LENGTH", value_parser = parse_line, required = true)]
        lines: Vec<(PathBuf, f64)>,
        /// Output CSV; defaults to the run directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Predict material parameters from a measured propagation constant.
    Extract {
        /// Directory holding the trained pipeline and models.
        #[arg(long)]
        models: Option<PathBuf>,
        /// Propagation-constant CSV (freq_hz,alpha_np_m,beta_rad_m).
        #[arg(long, conflicts_with = "lines")]
        gamma: Option<PathBuf>,
        /// Line measurements routed through multiline extraction.
        #[arg(long = "line", value_name = "FILE=LENGTH", value_parser = parse_line)]
        lines: Vec<(PathBuf, f64)>,
        /// Add a comparison against the configured reference values.
        #[arg(long)]
        reference: bool,
    },
    /// Collate a run directory into one Markdown summary.
    Report {
        /// Run directory; defaults to the configured one.
        #[arg(long)]
        dir: Option<PathBuf>,
    },
    /// Write synthetic `.s2p` files of every fixture line.
    Simulate {
        #[arg(long, default_value_t = FIXTURE_REFERENCE.sigma_ink)]
        sigma_ink: f64,
        #[arg(long, default_value_t = FIXTURE_REFERENCE.eps_fs)]
        eps_fs: f64,
        #[arg(long, default_value_t = FIXTURE_REFERENCE.eps_ds)]
        eps_ds: f64,
        #[arg(long, default_value_t = FIXTURE_REFERENCE.tan_delta)]
        tan_delta: f64,
        /// Number of log-spaced frequencies.
        #[arg(long, default_value_t = 200)]
        points: usize,
        /// Standard deviation of additive complex S-parameter noise.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_line(s: &str) -> Result<(PathBuf, f64), String> {
    let (path, length) = s.rsplit_once('=').ok_or_else(|| format!("expected FILE=LENGTH, got {s:?}"))?;
    let length: f64 = length.parse().map_err(|_| format!("invalid length in {s:?}"))?;
    if !(length > 0.0) || !length.is_finite() {
        return Err(format!("line length must be > 0 in {s:?}"));
    }
    Ok((PathBuf::from(path), length))
}

/// Exit status when extraction ran but verification failed.
const VERIFICATION_FAILED: u8 = 2;

fn run(cli: Cli) -> Result<ExitCode> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let ctx = Context::new(config, cli.seed, cli.workers, cli.dry_run).context("invalid configuration")?;
    match cli.command {
        Command::Generate => {
            commands::generate(&ctx)?;
        }
        Command::Train { dataset } => {
            commands::train(&ctx, dataset.as_deref())?;
        }
        Command::Gamma { lines, output } => {
            commands::gamma(&ctx, &lines, output.as_deref())?;
        }
        Command::Extract { models, gamma, lines, reference } => {
            let source = match (gamma, lines.is_empty()) {
                (Some(path), _) => GammaSource::Csv(path),
                (None, false) => GammaSource::Lines(lines),
                (None, true) => bail!("extract needs --gamma FILE or at least two --line FILE=LENGTH"),
            };
            let out = commands::extract(&ctx, models.as_deref(), &source, reference)?;
            if !out.verification.pass {
                return Ok(ExitCode::from(VERIFICATION_FAILED));
            }
        }
        Command::Report { dir } => {
            print!("{}", commands::report(&ctx, dir.as_deref())?);
        }
        Command::Simulate { sigma_ink, eps_fs, eps_ds, tan_delta, points, noise, out } => {
            let params = MaterialParams::new(sigma_ink, eps_fs, eps_ds, tan_delta)?;
            commands::simulate(&ctx, &params, points, noise, &out)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
