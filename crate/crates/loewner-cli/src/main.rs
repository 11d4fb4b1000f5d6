//! `loewner` — batch front end for evolution families, Loewner chains and
//! the verification suite. Outputs are deterministic: identical configs
//! produce byte-identical files.

mod commands;
mod config;
mod svg;

use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    /// Unreadable/malformed config or invalid parameter combination (exit 1).
    Config(String),
    /// Driver data violating the Herglotz conditions (exit 2).
    Validation(String),
    /// Engine/chain failure during an otherwise valid run (exit 3).
    Computation(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Computation(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Validation(m) | CliError::Computation(m) => m,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Parser)]
#[command(name = "loewner", version, about = "Loewner evolution toolbox")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check driver data against the Herglotz conditions.
    Validate(CommonArgs),
    /// Evaluate the evolution family on a grid; CSV columns
    /// s,t,z_re,z_im,w_re,w_im,dw_re,dw_im.
    Evolve(CommonArgs),
    /// Evaluate the standard Loewner chain; CSV columns
    /// s,z_re,z_im,f_re,f_im,horizon,tail_est.
    Chain(CommonArgs),
    /// Tabulate the beta invariant over the time grid; CSV columns t,beta.
    Beta(CommonArgs),
    /// Classify chain uniqueness from the beta limit (JSON).
    Classify(CommonArgs),
    /// Denjoy-Wolff classification of the autonomous semigroup (JSON).
    Semigroup(CommonArgs),
    /// Run the verification suite against the configured driver (JSON).
    Verify(CommonArgs),
    /// Emit an SVG plot (trajectories or chain circle images).
    Plot(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output file (defaults to output.path in the config, else stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Tabular output format (defaults to output.format, else csv).
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl CommonArgs {
    fn load(&self) -> Result<(config::RunConfig, Option<PathBuf>, Format), CliError> {
        let cfg = config::RunConfig::load(&self.config)?;
        let out = self
            .out
            .clone()
            .or_else(|| cfg.output.path.as_ref().map(PathBuf::from));
        let format = match self.format {
            Some(f) => f,
            None => match cfg.output.format.as_deref() {
                None | Some("csv") => Format::Csv,
                Some("json") => Format::Json,
                Some(other) => {
                    return Err(CliError::Config(format!(
                        "output.format must be csv or json, got `{other}`"
                    )))
                }
            },
        };
        Ok((cfg, out, format))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate(a) => run(a, commands::cmd_validate),
        Command::Evolve(a) => run(a, commands::cmd_evolve),
        Command::Chain(a) => run(a, commands::cmd_chain),
        Command::Beta(a) => run(a, commands::cmd_beta),
        Command::Classify(a) => run(a, commands::cmd_classify),
        Command::Semigroup(a) => run(a, commands::cmd_semigroup),
        Command::Verify(a) => run(a, commands::cmd_verify),
        Command::Plot(a) => run(a, commands::cmd_plot),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

/// A command's rendered output plus its verdict; reports are written even
/// when the verdict is a failure (validate/verify still emit their report
/// before exiting nonzero).
pub struct CmdOutput {
    pub body: String,
    pub verdict: Result<(), CliError>,
}

impl CmdOutput {
    pub fn ok(body: String) -> Self {
        Self {
            body,
            verdict: Ok(()),
        }
    }
}

fn run(
    args: &CommonArgs,
    f: impl Fn(&config::RunConfig, Format) -> Result<CmdOutput, CliError>,
) -> Result<(), CliError> {
    let (cfg, out, format) = args.load()?;
    let output = f(&cfg, format)?;
    write_output(out.as_deref(), &output.body)?;
    output.verdict
}

fn write_output(path: Option<&std::path::Path>, body: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, body)
            .map_err(|e| CliError::Computation(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}
