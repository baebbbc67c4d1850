//! Command-line driver for hyperspectral sharpening benchmarks.

pub mod campaign;
pub mod ppm;
pub mod tables;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use campaign::{
    cmd_all, cmd_crop, cmd_eval, cmd_sharpen, cmd_synth, resolve_methods, CampaignPaths,
    EvalOptions, Failure, Scale, SharpenOptions,
};
use hypersharp::io::CampaignConfig;

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "HYPERSHARP_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "hypersharp",
    version,
    about = "Synthesise, sharpen and score hyperspectral benchmark scenes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Campaign configuration JSON; defaults to the campaign's own
    /// config.json if present, then to built-in defaults
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Campaign directory
    #[arg(long, default_value = "campaign")]
    pub out: PathBuf,

    /// Worker threads (default: all cores; HYPERSHARP_THREADS is honoured)
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScaleArg {
    Rr,
    Fr,
}

impl From<ScaleArg> for Scale {
    fn from(s: ScaleArg) -> Scale {
        match s {
            ScaleArg::Rr => Scale::Rr,
            ScaleArg::Fr => Scale::Fr,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SelectionArgs {
    /// Evaluation scales to process
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [ScaleArg::Rr, ScaleArg::Fr])]
    pub scale: Vec<ScaleArg>,

    /// Comma-separated method names (default: every available method)
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic scenes and the campaign manifest
    Synth {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run sharpening methods over the generated scenes
    Sharpen {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        selection: SelectionArgs,
        /// Timed repetitions per method (the last result is kept)
        #[arg(long, default_value_t = 1)]
        repeats: usize,
    },
    /// Score sharpened cubes and write result tables
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        selection: SelectionArgs,
    },
    /// Export preview composites of truth and sharpened cubes
    Crop {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated method names (default: every available method)
        #[arg(long, value_delimiter = ',')]
        methods: Vec<String>,
    },
    /// Run the full pipeline: synth, sharpen, eval, crop
    All {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        selection: SelectionArgs,
        /// Timed repetitions per method (the last result is kept)
        #[arg(long, default_value_t = 1)]
        repeats: usize,
    },
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Synth { common }
            | Command::Sharpen { common, .. }
            | Command::Eval { common, .. }
            | Command::Crop { common, .. }
            | Command::All { common, .. } => common,
        }
    }
}

/// Configures the global worker pool once; later calls are harmless.
fn init_threads(requested: Option<usize>) {
    let from_env = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    let Some(threads) = requested.or(from_env) else {
        return;
    };
    if threads == 0 {
        log::warn!("ignoring a zero thread count");
        return;
    }
    if rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .is_err()
    {
        log::debug!("worker pool already initialised; thread count unchanged");
    }
}

/// Effective configuration: an explicit file wins, then the campaign's
/// own echoed config, then built-in defaults.
fn load_config(common: &CommonArgs) -> Result<CampaignConfig> {
    if let Some(path) = &common.config {
        return CampaignConfig::load(path)
            .with_context(|| format!("cannot load {}", path.display()));
    }
    let echoed = CampaignPaths::new(&common.out).config();
    if echoed.is_file() {
        return CampaignConfig::load(&echoed)
            .with_context(|| format!("cannot load {}", echoed.display()));
    }
    Ok(CampaignConfig::default())
}

fn report(failures: &[Failure]) -> i32 {
    if failures.is_empty() {
        return 0;
    }
    eprintln!("{} step(s) failed:", failures.len());
    for f in failures {
        eprintln!("  {f}");
    }
    1
}

/// Executes a parsed command line and returns the process exit code:
/// 0 on success, 1 when isolated per-method steps failed.
pub fn run(cli: Cli) -> Result<i32> {
    let common = cli.command.common().clone();
    init_threads(common.threads);
    let config = load_config(&common)?;

    match cli.command {
        Command::Synth { .. } => {
            cmd_synth(&config, &common.out)?;
            Ok(0)
        }
        Command::Sharpen {
            selection, repeats, ..
        } => {
            let opts = SharpenOptions {
                scales: selection.scale.iter().map(|&s| s.into()).collect(),
                methods: resolve_methods(&selection.methods)?,
                repeats,
            };
            Ok(report(&cmd_sharpen(&config, &common.out, &opts)?))
        }
        Command::Eval { selection, .. } => {
            let opts = EvalOptions {
                scales: selection.scale.iter().map(|&s| s.into()).collect(),
                methods: resolve_methods(&selection.methods)?,
            };
            Ok(report(&cmd_eval(&config, &common.out, &opts)?))
        }
        Command::Crop { methods, .. } => {
            let methods = resolve_methods(&methods)?;
            Ok(report(&cmd_crop(&config, &common.out, &methods)?))
        }
        Command::All {
            selection, repeats, ..
        } => {
            let opts = SharpenOptions {
                scales: selection.scale.iter().map(|&s| s.into()).collect(),
                methods: resolve_methods(&selection.methods)?,
                repeats,
            };
            Ok(report(&cmd_all(&config, &common.out, &opts)?))
        }
    }
}
