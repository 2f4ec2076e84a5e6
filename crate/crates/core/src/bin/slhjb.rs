use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use slhjb::config::{Format, ProblemConfig, RunConfig, REGISTRY};
use slhjb::io;
use slhjb::run;

#[derive(Parser)]
#[command(
    name = "slhjb",
    version,
    about = "Semi-Lagrangian HJB solver with exact local minimization"
)]
struct Cli {
    /// Worker threads for the sweeps (default: available cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for noise and random instances; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Field export format; overrides the config.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured problem and export fields and a report.
    Solve { config: PathBuf },
    /// Benchmark the inner minimizers on random instances against the oracle.
    BenchMinimizers { config: PathBuf },
    /// Solve, then simulate open and closed loop trajectories.
    Simulate { config: PathBuf },
    /// Error table over a sequence of grid spacings.
    Convergence { config: PathBuf },
    /// Print a registry problem as an inline config, or list the registry.
    Registry { name: Option<String> },
}

fn load(cli: &Cli, path: &Path) -> slhjb::Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(f) = cli.format {
        cfg.outputs.format = f;
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> slhjb::Result<bool> {
    match &cli.command {
        Command::Solve { config } => {
            let cfg = load(cli, config)?;
            let solved = run::solve(&cfg)?;
            run::write_solution(&cfg, &solved, &cli.out)?;
            let s = &solved.summary;
            println!(
                "{}: {} sweeps, residual {:.3e}, converged {}",
                s.problem, s.sweeps, s.final_residual, s.converged
            );
            if let (Some(v), Some(u)) = (s.value_error, s.control_error) {
                println!(
                    "value error: L1 {:.3e}  L1 mean {:.3e}  Linf {:.3e}",
                    v.l1, v.l1_mean, v.linf
                );
                println!(
                    "control error: L1 {:.3e}  L1 mean {:.3e}  Linf {:.3e}",
                    u.l1, u.l1_mean, u.linf
                );
            }
            Ok(s.converged)
        }
        Command::BenchMinimizers { config } => {
            let cfg = load(cli, config)?;
            let summary = run::bench_minimizers(&cfg, Some(&cli.out))?;
            println!("family,method,runs,converged,fallbacks,infeasible,mean_iterations,max_gap,mean_l2_error");
            for s in &summary {
                println!(
                    "{},{},{},{},{},{},{:.2},{:.3e},{:.3e}",
                    s.family,
                    s.method,
                    s.runs,
                    s.converged,
                    s.fallbacks,
                    s.infeasible,
                    s.mean_iterations,
                    s.max_gap,
                    s.mean_l2_error
                );
            }
            Ok(true)
        }
        Command::Simulate { config } => {
            let cfg = load(cli, config)?;
            let solved = run::solve(&cfg)?;
            run::write_solution(&cfg, &solved, &cli.out)?;
            let sims = run::simulate_all(&cfg, &solved, Some(&cli.out))?;
            for s in &sims {
                println!(
                    "{:?} seed {:?}: terminal distance {:.4e}, cost {:.4e}",
                    s.mode, s.seed, s.terminal_distance, s.cost
                );
            }
            Ok(solved.report.converged)
        }
        Command::Convergence { config } => {
            let cfg = load(cli, config)?;
            let rows = run::convergence(&cfg)?;
            io::write_table(&rows, io::create(&cli.out.join("convergence.csv"))?)?;
            println!("k,method,l1_value,l1_control,l1_mean_value,l1_mean_control,sweeps,wall_time");
            for r in &rows {
                println!(
                    "{},{},{:.3e},{:.3e},{:.3e},{:.3e},{},{:.2}",
                    r.k, r.method, r.l1_value, r.l1_control, r.l1_mean_value, r.l1_mean_control, r.sweeps, r.wall_time
                );
            }
            Ok(true)
        }
        Command::Registry { name } => {
            match name {
                Some(n) => println!("{}", serde_json::to_string_pretty(&ProblemConfig::registry(n)?)?),
                None => REGISTRY.iter().for_each(|n| println!("{n}")),
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot set up {n} workers: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: value iteration did not converge");
            ExitCode::from(1)
        }
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
