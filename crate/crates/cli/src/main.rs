//! `squeezekit` command-line pipeline.
//!
//! Every subcommand reads one TOML config (built-in defaults when `--config` is
//! omitted), writes `<stage>.<ext>` files under `--out` and embeds the
//! resolved config in its JSON output.

mod commands;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use squeezekit::pipeline::ExperimentConfig;
use squeezekit::Error;

#[derive(Debug, Parser)]
#[command(
    name = "squeezekit",
    version,
    about = "Multimode squeezed-light simulation and analysis"
)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML experiment config; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Overrides the pulse and noise seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Only errors on stderr, nothing on stdout.
    #[arg(short, long, global = true)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Joint spectral amplitude and its Schmidt decomposition.
    Jsa {
        /// Flat phase matching under a very broad pump: a product JSA.
        #[arg(long)]
        separable: bool,
    },
    /// Calibrated supermode state, squeezing table and frexel projection.
    State,
    /// Covariance reconstruction from pair variances and supermode recovery.
    Tomography {
        /// Measured variances (`kind,i,j,var_q,var_p,sigma_q,sigma_p`); simulated
        /// from the frexel state when omitted.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// PPT scan over all bipartitions.
    Ppt {
        /// State JSON, or the `state.json` written by `state`; the frexel
        /// state of the config when omitted.
        #[arg(long)]
        state: Option<PathBuf>,
    },
    /// Pulsed homodyne simulation and pulse-by-pulse estimate.
    Pulses,
}

pub(crate) struct Context {
    pub config: ExperimentConfig,
    pub out: PathBuf,
    pub quiet: bool,
}

impl Context {
    pub fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> squeezekit::Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| {
                Error::Configuration(format!("cannot read config {}: {e}", p.display()))
            })?;
            ExperimentConfig::from_toml(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        cfg.pulse.seed = s;
        cfg.noise.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InfeasibleTarget { .. } => 3,
        Error::IncompleteDataset { .. } => 4,
        Error::Numerical(_) => 5,
        _ => 2,
    }
}

fn run(cli: Cli) -> squeezekit::Result<()> {
    let config = load_config(cli.common.config.as_deref(), cli.common.seed)?;
    std::fs::create_dir_all(&cli.common.out).map_err(|e| {
        Error::Configuration(format!("cannot create {}: {e}", cli.common.out.display()))
    })?;
    let ctx = Context {
        config,
        out: cli.common.out,
        quiet: cli.common.quiet,
    };
    match cli.command {
        Command::Jsa { separable } => commands::jsa(ctx, separable),
        Command::State => commands::state(ctx),
        Command::Tomography { dataset } => commands::tomography(ctx, dataset.as_deref()),
        Command::Ppt { state } => commands::ppt(ctx, state.as_deref()),
        Command::Pulses => commands::pulses(ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.common.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
