use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use grafflow_cli::runner::{convergence_study, qualitative_checks, run_experiment, RunOptions};

/// Stationary states of nonlinear Schrödinger equations on metric graphs.
#[derive(Parser)]
#[command(name = "grafflow", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment spec file (JSON).
    spec: PathBuf,
    /// Output root directory (default: $GRAFFLOW_OUT_ROOT or ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use the spec's paper-scale overrides.
    #[arg(long)]
    paper_scale: bool,
    /// Override the iteration budget.
    #[arg(long, value_name = "N")]
    max_iter: Option<usize>,
    /// Override the time step.
    #[arg(long, value_name = "X")]
    dt: Option<f64>,
    /// Override the stopping tolerance.
    #[arg(long, value_name = "X")]
    eps: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single flow and write field/energy/error artifacts.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Dump the assembled operator as `row col value` lines.
        #[arg(long, value_name = "FILE")]
        dump_operator: Option<PathBuf>,
    },
    /// Run the flow over a ladder of mesh spacings and fit the order.
    Converge {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the flow and check localization/decay of the state.
    Check {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn options(common: &CommonArgs, dump_operator: Option<PathBuf>) -> RunOptions {
    let out_root = common
        .out
        .clone()
        .or_else(|| std::env::var_os("GRAFFLOW_OUT_ROOT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    RunOptions {
        out_root,
        paper_scale: common.paper_scale,
        max_iterations: common.max_iter,
        dt: common.dt,
        eps: common.eps,
        dump_operator,
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            common,
            dump_operator,
        } => {
            let opts = options(&common, dump_operator);
            let artifacts = run_experiment(&common.spec, &opts)?;
            let s = &artifacts.summary;
            println!(
                "run: E = {:.8}, mass = {:.12}, mu = {:.6}, {} iterations ({})",
                s.final_energy, s.final_mass, s.chemical_potential, s.iterations, s.termination
            );
            if let (Some(linf), Some(l2)) = (s.linf_error, s.l2_error) {
                println!("     vs reference: L∞ = {linf:.3e}, L² = {l2:.3e}");
            }
            println!("     artifacts in {}", artifacts.out_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Converge { common } => {
            let opts = options(&common, None);
            let report = convergence_study(&common.spec, &opts)?;
            println!("dx\tlinf_error\tlocal_order");
            for row in &report.rows {
                match row.local_order {
                    Some(p) => println!("{}\t{:.6e}\t{:.3}", row.dx, row.linf_error, p),
                    None => println!("{}\t{:.6e}\t-", row.dx, row.linf_error),
                }
            }
            println!("fitted order: {:.4}", report.fitted_order);
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { common } => {
            let opts = options(&common, None);
            let report = qualitative_checks(&common.spec, &opts)?;
            println!(
                "max |ψ| = {:.6} on `{}` at x = {:.3} ({})",
                report.max_value,
                report.max_edge,
                report.max_x,
                if report.localization_ok { "ok" } else { "MISPLACED" }
            );
            println!(
                "monotone decay beyond cutoff: {}",
                if report.monotone_ok { "ok" } else { "VIOLATED" }
            );
            for v in report.violations.iter().take(5) {
                println!("  `{}` at x = {:.3}: {}", v.edge, v.x, v.detail);
            }
            if report.passed() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(2))
            }
        }
    }
}
