use clap::{Args, Parser, Subcommand};
use henon_mixing_cli::exit_code;
use henon_mixing_cli::run::{execute, Command, Options};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "henon-mixing",
    version,
    about = "Green functions, periodic-orbit samples and mixing statistics for complex Hénon maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Render G⁺ and G⁻ on a real slice.
    Green(Common),
    /// Sample the measure of maximal entropy by periodic saddle points.
    SampleMu(Common),
    /// Correlation decay curve from a saved sample.
    Mixing(Common),
    /// Central limit statistics from a saved sample.
    Clt(Common),
    /// Run the invariant checks.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (defaults to the number of cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the root seed from the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() {
    let cli = Cli::parse();
    let (cmd, common) = match cli.command {
        Cmd::Green(c) => (Command::Green, c),
        Cmd::SampleMu(c) => (Command::SampleMu, c),
        Cmd::Mixing(c) => (Command::Mixing, c),
        Cmd::Clt(c) => (Command::Clt, c),
        Cmd::Verify(c) => (Command::Verify, c),
    };
    let opts = Options {
        config: common.config,
        out: common.out,
        threads: common.threads,
        seed: common.seed,
    };
    if let Err(e) = execute(cmd, &opts) {
        eprintln!("error: {e:#}");
        std::process::exit(exit_code(&e));
    }
}
