use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cellflow_cli::{run, Command, Options};

/// Finite abstractions of smooth flows, driven by a TOML config.
#[derive(Parser, Debug)]
#[command(name = "cellflow", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Root seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output directory when neither --out nor the config sets one.
    #[arg(long, global = true, env = "CELLFLOW_OUT_DIR", hide_env_values = true)]
    default_out: Option<PathBuf>,
    /// Worker threads; 1 runs sequentially.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Check the config schema and exit.
    Validate { config: PathBuf },
    /// Build the construction and write cells.csv, phi.csv and extras.
    Abstract { config: PathBuf },
    /// Build, then run the configured checks.
    Check {
        config: PathBuf,
        /// Check this phi.csv instead of the constructed map.
        #[arg(long)]
        replay: Option<PathBuf>,
    },
    /// Build, then answer the [safety] query.
    Verify { config: PathBuf },
    /// Write trajectories.csv and, in 2D, cells_2d.svg.
    Plot { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.quiet {
        "error"
    } else {
        "warn"
    }))
    .init();
    if let Some(n) = cli.jobs {
        cellflow::par::configure_threads(n);
    }
    let mut opts = Options {
        seed: cli.seed,
        out: cli.out,
        default_out: cli.default_out,
        replay: None,
    };
    let (cmd, path) = match cli.cmd {
        Cmd::Validate { config } => (Command::Validate, config),
        Cmd::Abstract { config } => (Command::Abstract, config),
        Cmd::Check { config, replay } => {
            opts.replay = replay;
            (Command::Check, config)
        }
        Cmd::Verify { config } => (Command::Verify, config),
        Cmd::Plot { config } => (Command::Plot, config),
    };
    let outcome = run(cmd, &path, &opts);
    if !cli.quiet {
        for line in &outcome.report {
            println!("{line}");
        }
        for f in &outcome.files {
            println!("wrote {}", f.display());
        }
    }
    if let Some(e) = &outcome.error {
        eprintln!("error: {e}");
    }
    ExitCode::from(outcome.status.code() as u8)
}
