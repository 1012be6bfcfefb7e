use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use outreg_core::exo_factorization::FactorizationMethod;

mod commands;
mod summary;

/// Data-driven output regulation: collect an experiment, factorize the
/// exosignal, synthesize a gain by SDP and verify it.
///
/// Exit status is 0 when every enabled check passes, 1 when a check fails
/// and 2 on configuration or stage errors.
#[derive(Parser)]
#[command(name = "outreg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the open-loop experiment and write its record as CSV.
    Collect(Common),
    /// Factorize and solve the SDP with designer-side checks only.
    Synthesize(Common),
    /// Full pipeline with oracle checks. Needs plant matrices in the config.
    Verify(Common),
    /// Full pipeline, writing the report and all trajectories.
    Run(RunArgs),
    /// The VTOL aircraft scenario with a fresh experiment.
    PaperExample(ExampleArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    /// Include the hidden exosystem state in CSV output.
    #[arg(long)]
    unmask: bool,
    /// Artifact directory. Defaults to `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone, Copy, Default)]
struct Overrides {
    /// Seed for random experiment inputs.
    #[arg(long)]
    seed: Option<u64>,
    /// Factorization method. Switching to `jordan` analyzes S automatically;
    /// switching to `krylov` uses w* = e1.
    #[arg(long, value_enum)]
    factorization: Option<Method>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long, required_unless_present = "sweep", conflicts_with = "sweep")]
    config: Option<PathBuf>,
    /// Independent configurations to run in parallel. Each writes to
    /// `<out>/<config stem>`.
    #[arg(long, num_args = 1..)]
    sweep: Vec<PathBuf>,
    /// Worker threads for `--sweep`.
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long)]
    unmask: bool,
    /// Artifact directory. Defaults to `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExampleArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Method::Jordan)]
    factorization: Method,
    /// Start the closed loop from w(0) = 0.
    #[arg(long)]
    zero_w0: bool,
    #[arg(long)]
    unmask: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    emit_config: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Jordan,
    Krylov,
}

impl From<Method> for FactorizationMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Jordan => FactorizationMethod::Jordan,
            Method::Krylov => FactorizationMethod::Krylov,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let status = match cli.command {
        Command::Collect(a) => commands::collect(&a),
        Command::Synthesize(a) => commands::synthesize(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::Run(a) => commands::run(&a),
        Command::PaperExample(a) => commands::paper_example(&a),
    };
    ExitCode::from(status as u8)
}
