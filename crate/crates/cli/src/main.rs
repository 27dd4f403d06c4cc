use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ciliaflow::{
    apply_overrides, cmd_gradcheck, cmd_optimize, cmd_simulate, cmd_sweep, load_config,
    validate_overridden, CliError,
};

/// Magnetic bead-chain cilium: forward simulation and pumping optimization.
#[derive(Parser)]
#[command(name = "ciliaflow", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration file (key = value format; may be empty).
    #[arg(long)]
    config: PathBuf,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Time-step count override.
    #[arg(long)]
    nt: Option<usize>,
    /// Control-knot count override.
    #[arg(long)]
    nu: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Forward solve from the rest chain; writes trajectory, energies, and
    /// a pumping summary.
    Simulate(CommonArgs),
    /// Fletcher-Reeves optimization of the field-angle schedule.
    Optimize(CommonArgs),
    /// Adjoint gradient versus finite differences of the objective.
    Gradcheck {
        #[command(flatten)]
        common: CommonArgs,
        /// Negate the adjoint gradient first (harness self-test hook).
        #[arg(long, hide = true)]
        flip_sign: bool,
    },
    /// Optimize once per configured initial-control preset.
    Sweep(CommonArgs),
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    let (common, flip_sign, which) = match &cli.command {
        Command::Simulate(c) => (c, false, "simulate"),
        Command::Optimize(c) => (c, false, "optimize"),
        Command::Gradcheck { common, flip_sign } => (common, *flip_sign, "gradcheck"),
        Command::Sweep(c) => (c, false, "sweep"),
    };
    let mut cfg = load_config(&common.config)?;
    apply_overrides(
        &mut cfg,
        common.out.clone(),
        common.seed,
        common.nt,
        common.nu,
    );
    validate_overridden(&cfg)?;

    match which {
        "simulate" => {
            let summary = cmd_simulate(&cfg)?;
            println!(
                "pumping_raw = {:.6e} N m, pumping_flow = {:.6e} m^3/s (outputs in {})",
                summary.pumping.pumping_raw,
                summary.pumping.pumping_flow,
                cfg.output_dir.display()
            );
        }
        "optimize" => {
            let out = cmd_optimize(&cfg)?;
            let last = out.report.final_record();
            println!(
                "{} iterations, termination {:?}, final pumping_raw = {:.6e} N m (outputs in {})",
                out.report.iterations.len(),
                out.report.termination,
                last.pumping_raw,
                cfg.output_dir.display()
            );
        }
        "gradcheck" => {
            let out = cmd_gradcheck(&cfg, flip_sign)?;
            if !out.passed {
                // Numerical disagreement: report through the numerical exit
                // path without a panic.
                eprintln!(
                    "gradcheck failed: max relative error {:.3e} above {:.1e}",
                    out.max_rel_error, out.tolerance
                );
                std::process::exit(2);
            }
        }
        "sweep" => {
            let out = cmd_sweep(&cfg)?;
            for row in &out.rows {
                println!("{}: {}", row.preset, row.status);
            }
            println!("table written to {}", cfg.output_dir.join("table3.csv").display());
        }
        _ => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
