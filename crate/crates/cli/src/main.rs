use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use resmin::adapt::{RefinementMode, SolverKind};

mod commands;

#[derive(Parser)]
#[command(name = "resmin", version, about = "Adaptive residual minimization on dual discontinuous Galerkin norms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the built-in problems.
    ListProblems,
    /// One solve on the initial mesh.
    Solve(RunArgs),
    /// A uniform or adaptive refinement study.
    Study(RunArgs),
}

#[derive(Args, Clone)]
pub struct RunArgs {
    /// JSON run configuration.
    #[arg(short, long)]
    config: PathBuf,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    /// Write legacy VTK fields for every level.
    #[arg(long)]
    vtk: bool,
    /// Override the output directory.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy)]
enum ModeArg {
    Uniform,
    Adaptive,
}

#[derive(ValueEnum, Clone, Copy)]
enum SolverArg {
    Direct,
    Iterative,
}

impl From<ModeArg> for RefinementMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Uniform => RefinementMode::Uniform,
            ModeArg::Adaptive => RefinementMode::Adaptive,
        }
    }
}

impl From<SolverArg> for SolverKind {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Direct => SolverKind::Direct,
            SolverArg::Iterative => SolverKind::Iterative,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::ListProblems => {
            print!("{}", commands::list_problems());
            Ok(())
        }
        Command::Solve(args) => commands::init_threads().and_then(|_| commands::solve(&args)),
        Command::Study(args) => commands::init_threads().and_then(|_| commands::study(&args)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
