mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{Session, Failure};
use config::RunConfig;

/// Config-driven experiments for the sextic mean-field model.
#[derive(Debug, Parser)]
#[command(name = "sextic", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration (TOML, or JSON with a .json extension).
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory; overrides `output` from the config.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Sample even when the measure fails the theorem hypotheses.
    #[arg(long)]
    force: bool,
    /// Progress messages on stderr.
    #[arg(short, long)]
    verbose: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate the measure and the interaction hypotheses.
    Check(Common),
    /// Verify the expansion of the Cramer transform and scan G_n.
    Cramer(Common),
    /// Run the sampler for every n in `n_list`.
    Sample(Common),
    /// Compare samples with the limit law.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Sample CSV files; defaults to the files `sample` writes for `n_list`.
        samples: Vec<PathBuf>,
    },
    /// Exact law of the sums by enumeration.
    Exact(Common),
    /// Density of the sums of three coordinates and the integrability diagnostic.
    Density3(Common),
}

fn context(common: &Common) -> Result<Session, Failure> {
    let config = RunConfig::load(&common.config).map_err(Failure::Config)?;
    let out = common.out.clone().unwrap_or_else(|| config.output.clone());
    Ok(Session {
        config,
        out,
        force: common.force,
        verbose: common.verbose,
    })
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Check(c) => commands::check(&context(c)?),
        Command::Cramer(c) => commands::cramer(&context(c)?),
        Command::Sample(c) => commands::sample(&context(c)?),
        Command::Analyze { common, samples } => commands::analyze(&context(common)?, samples),
        Command::Exact(c) => commands::exact(&context(c)?),
        Command::Density3(c) => commands::density3(&context(c)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.exit_code())
        }
    }
}
