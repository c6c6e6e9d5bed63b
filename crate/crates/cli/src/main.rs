//! `kifu`: analyze Go game records with an analysis engine, benchmark
//! networks and produce suspicion reports with plot-ready data.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "kifu", version, about = "Engine-assisted Go game record analysis")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default, Clone)]
pub struct GlobalArgs {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Engine command line, e.g. "katago analysis -config a.cfg -model net.bin.gz".
    #[arg(long, global = true)]
    pub engine: Option<String>,
    /// Network label used in cache keys and outputs.
    #[arg(long, global = true)]
    pub network_label: Option<String>,
    #[arg(long, global = true)]
    pub visits: Option<u32>,
    #[arg(long, global = true)]
    pub rules: Option<String>,
    #[arg(long, global = true)]
    pub komi_override: Option<f64>,
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seeds the stub engine and position sampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Use the built-in stub engine, optionally with options such as
    /// --stub=shape=one-hot,agreement=every-2,noise.
    #[arg(long, global = true, num_args = 0..=1, require_equals = true, default_missing_value = "")]
    pub stub: Option<String>,
    /// Indicator thresholds file (TOML).
    #[arg(long, global = true)]
    pub thresholds: Option<PathBuf>,
    /// Replay illegal moves leniently instead of rejecting the game.
    #[arg(long, global = true)]
    pub leniency: bool,
    /// Games processed concurrently.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Engine field read as the score mean: scoreLead, scoreMean or scoreSelfplay.
    #[arg(long, global = true)]
    pub score_field: Option<String>,
    /// Seconds to wait for any single engine response.
    #[arg(long, global = true)]
    pub timeout_secs: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    Perfect,
    Human,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Analyze games and store the results in the cache.
    Analyze {
        /// SGF files or directories containing them.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Write suspicion reports and plot specs, one directory per game.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = ReportFormat::Both)]
        format: ReportFormat,
        /// Seconds spent per move, one number per line (single game only).
        #[arg(long)]
        move_times: Option<PathBuf>,
        /// Weight candidate average and median by visits.
        #[arg(long)]
        visit_weighted: bool,
    },
    /// Hit rate and KL-divergence per network over a corpus.
    Strength {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// LABEL=SPEC where SPEC is "stub[:options]" or an engine command.
        /// Repeat for several networks.
        #[arg(long = "network")]
        networks: Vec<String>,
        /// Use one random position per game (seeded by --seed).
        #[arg(long)]
        sample: bool,
        /// Histogram bins.
        #[arg(long, default_value_t = 20)]
        bins: usize,
    },
    /// KL-divergence of one position over a grid of visit counts.
    Calibrate {
        input: PathBuf,
        /// Analyze the position before this move (0-based).
        #[arg(long)]
        turn: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [10u32, 100, 1000])]
        grid: Vec<u32>,
        #[arg(long, default_value_t = 7)]
        repeats: usize,
    },
    /// Serve the stub engine on stdin/stdout.
    #[command(hide = true)]
    StubEngine,
    /// Write a synthetic fixture game as SGF.
    #[command(hide = true)]
    Synth {
        #[arg(long, value_enum)]
        kind: SynthKind,
        /// Seed for the players' choices; defaults to the fixture seed.
        #[arg(long)]
        game_seed: Option<u64>,
        #[arg(long, default_value_t = 150)]
        plies: usize,
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .format_target(false)
        .init();
    // Usage errors exit 1; exit code 2 is reserved for partial success.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let settings = config::Settings::resolve(&cli.global)?;
    let outcome = match cli.command {
        Command::Analyze { inputs } => commands::analyze(&settings, &inputs)?,
        Command::Report { inputs, format, move_times, visit_weighted } => {
            commands::report(&settings, &inputs, format, move_times.as_deref(), visit_weighted)?
        }
        Command::Strength { inputs, networks, sample, bins } => {
            commands::strength(&settings, &inputs, &networks, sample, bins)?
        }
        Command::Calibrate { input, turn, grid, repeats } => {
            commands::calibrate(&settings, &input, turn, &grid, repeats)?
        }
        Command::StubEngine => commands::stub_engine(&settings)?,
        Command::Synth { kind, game_seed, plies, output } => {
            commands::synth(&settings, kind, game_seed, plies, &output)?
        }
    };
    Ok(outcome.exit_code())
}
