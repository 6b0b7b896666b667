use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use latent_mfg::io_cli::{parse_config, run_scenario, Overrides, RunMode};

#[derive(Parser)]
#[command(name = "latent-mfg", version, about = "Latent-alpha mean-field execution game")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form mean-field equilibrium on the grid.
    Equilibrium(RunArgs),
    /// Finite-player game replications with agent paths and objectives.
    Simulate(RunArgs),
    /// Best-response gap of the equilibrium across population sizes.
    NashGap(RunArgs),
    /// Price, latent state and posterior paths only.
    FilterDemo(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (mode, args) = match cli.command {
        Command::Equilibrium(a) => (RunMode::Equilibrium, a),
        Command::Simulate(a) => (RunMode::Simulate, a),
        Command::NashGap(a) => (RunMode::NashGap, a),
        Command::FilterDemo(a) => (RunMode::FilterDemo, a),
    };
    let result = parse_config(&args.config).and_then(|mut cfg| {
        cfg.apply(&Overrides {
            mode: Some(mode),
            seed: args.seed,
            output_dir: args.out,
            n_steps: args.steps,
            replications: args.reps,
        });
        run_scenario(&cfg).map(|s| (cfg.run.output_dir, s))
    });
    match result {
        Ok((dir, summary)) => {
            for f in summary.files {
                println!("{}", dir.join(f).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
