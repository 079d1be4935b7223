use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use feinn_cli::{run_command, Command, Overrides};

#[derive(Parser)]
#[command(name = "feinn", version, about = "Train finite element interpolated neural networks on unfitted meshes")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Train one network per Nitsche parameter and write its history.
    Run(Common),
    /// Mesh and order studies with fitted convergence rates.
    Convergence(Common),
    /// Train on a disk moved along the diagonal.
    MovingDomain(Common),
    /// Identify the reaction coefficient from partial observations.
    Inverse(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Network seed, overriding `nn.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps (default: one per core).
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (cmd, common) = match cli.command {
        Sub::Run(c) => (Command::Run, c),
        Sub::Convergence(c) => (Command::Convergence, c),
        Sub::MovingDomain(c) => (Command::MovingDomain, c),
        Sub::Inverse(c) => (Command::Inverse, c),
    };
    if common.jobs == Some(0) {
        eprintln!("error: --jobs must be positive");
        return ExitCode::from(2);
    }
    let overrides = Overrides { out: common.out, seed: common.seed, jobs: common.jobs };
    match run_command(cmd, &common.config, &overrides) {
        Ok(dir) => {
            println!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
