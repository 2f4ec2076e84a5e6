//! Drivers behind the command line subcommands. Each writes its artifacts
//! into an output directory and returns a summary.

use std::path::{Path, PathBuf};

use log::info;
use serde::Serialize;

use crate::bench;
use crate::config::{Format, RunConfig};
use crate::error::{Error, Result};
use crate::io::{self, ConvergenceRow};
use crate::reference::{control_error_norms, error_norms, ErrorNorms};
use crate::solver::{value_iteration, ProblemSpec, SolveReport};
use crate::synthesis::{control_field, distance, simulate, LoopMode, NoiseSpec, Trajectory};

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub problem: String,
    pub k: f64,
    pub h: f64,
    pub method: String,
    pub sweeps: usize,
    pub converged: bool,
    pub final_residual: f64,
    pub wall_time: f64,
    pub fallbacks: usize,
    pub value_error: Option<ErrorNorms>,
    pub control_error: Option<ErrorNorms>,
    pub residual_history: Vec<f64>,
    pub avg_subiterations: Vec<f64>,
}

pub struct Solved {
    pub spec: ProblemSpec,
    pub report: SolveReport,
    pub control: crate::grid::VectorField,
    pub summary: SolveSummary,
}

fn problem_name(cfg: &RunConfig) -> String {
    cfg.problem.clone().unwrap_or_else(|| "inline".into())
}

/// Solves the configured problem and compares with the closed-form solution
/// when one exists.
pub fn solve(cfg: &RunConfig) -> Result<Solved> {
    let problem = cfg.problem_config()?;
    let spec = cfg.spec_for(&problem)?;
    info!(
        "solving {} on {} nodes (k = {}, h = {})",
        problem_name(cfg),
        spec.grid.len(),
        spec.grid.k(),
        spec.h
    );
    let report = value_iteration(&spec, None)?;
    let control = control_field(&report.value, &spec)?;
    let (value_error, control_error) = match problem.exact() {
        Some(exact) => (
            Some(error_norms(&report.value, &exact.value_field(&spec.grid))?),
            Some(control_error_norms(&control, &exact.control_field(&spec.grid))?),
        ),
        None => (None, None),
    };
    let summary = SolveSummary {
        problem: problem_name(cfg),
        k: spec.grid.k(),
        h: spec.h,
        method: spec.minimizer.method.name().into(),
        sweeps: report.sweeps,
        converged: report.converged,
        final_residual: report.residual_history.last().copied().unwrap_or(f64::NAN),
        wall_time: report.wall_time.as_secs_f64(),
        fallbacks: report.fallbacks.iter().sum(),
        value_error,
        control_error,
        residual_history: report.residual_history.clone(),
        avg_subiterations: report.avg_subiterations.clone(),
    };
    Ok(Solved {
        spec,
        report,
        control,
        summary,
    })
}

fn ext(format: Format) -> &'static str {
    match format {
        Format::Csv => "csv",
        Format::Vtk => "vtk",
    }
}

/// Writes value and control fields and `report.json`.
pub fn write_solution(cfg: &RunConfig, solved: &Solved, out: &Path) -> Result<Vec<PathBuf>> {
    let format = cfg.outputs.format;
    let mut written = Vec::new();
    if cfg.outputs.value {
        let path = out.join(format!("value.{}", ext(format)));
        let w = io::create(&path)?;
        match format {
            Format::Csv => io::write_scalar_csv(&solved.report.value, w)?,
            Format::Vtk => io::write_scalar_vtk(&solved.report.value, "value", w)?,
        }
        written.push(path);
    }
    if cfg.outputs.control {
        let path = out.join(format!("control.{}", ext(format)));
        let w = io::create(&path)?;
        match format {
            Format::Csv => io::write_vector_csv(&solved.control, w)?,
            Format::Vtk => io::write_vector_vtk(&solved.control, "control", w)?,
        }
        written.push(path);
    }
    if cfg.outputs.report {
        let path = out.join("report.json");
        serde_json::to_writer_pretty(io::create(&path)?, &solved.summary)?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationSummary {
    pub mode: LoopMode,
    pub seed: Option<u64>,
    pub steps: usize,
    pub terminal_state: Vec<f64>,
    /// Distance of the terminal state to that of the noise-free trajectory.
    pub terminal_distance: f64,
    pub cost: f64,
    pub clamp_events: usize,
}

/// Simulates the configured trajectories from a solved problem.
pub fn simulate_all(cfg: &RunConfig, solved: &Solved, out: Option<&Path>) -> Result<Vec<SimulationSummary>> {
    let sim = cfg
        .simulation
        .as_ref()
        .ok_or_else(|| Error::Config("missing `simulation` section".into()))?;
    let spec = &solved.spec;
    let d = spec.grid.dim();
    if sim.x0.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: sim.x0.len(),
        });
    }
    let x0 = io::point(&sim.x0)?;
    let v = &solved.report.value;
    let nominal = simulate(v, spec, &x0, sim.steps, LoopMode::ClosedLoop, None)?;
    let steady = *nominal.terminal_state();
    let mut summaries = Vec::new();
    let mut record = |traj: &Trajectory, seed: Option<u64>| -> Result<()> {
        if let (Some(out), true) = (out, cfg.outputs.trajectory) {
            let mode = match traj.mode {
                LoopMode::OpenLoop => "open_loop",
                LoopMode::ClosedLoop => "closed_loop",
            };
            let name = match seed {
                Some(s) => format!("trajectory_{mode}_seed{s}.csv"),
                None => format!("trajectory_{mode}.csv"),
            };
            io::write_trajectory_csv(traj, io::create(&out.join(name))?)?;
        }
        summaries.push(SimulationSummary {
            mode: traj.mode,
            seed,
            steps: traj.len() - 1,
            terminal_state: traj.terminal_state()[..d].to_vec(),
            terminal_distance: distance(traj.terminal_state(), &steady, d),
            cost: traj.total_cost(),
            clamp_events: traj.clamp_events.len(),
        });
        Ok(())
    };
    for &mode in &sim.modes {
        let traj = match mode {
            LoopMode::ClosedLoop => nominal.clone(),
            LoopMode::OpenLoop => simulate(v, spec, &x0, sim.steps, mode, None)?,
        };
        record(&traj, None)?;
        for r in 0..sim.runs {
            let seed = cfg.seed.wrapping_add(r as u64);
            let noise = match sim.noise {
                Some(n) => NoiseSpec {
                    structural: n.structural,
                    output: n.output,
                    seed,
                },
                None => NoiseSpec::default_for(spec.grid.k(), seed),
            };
            let traj = simulate(v, spec, &x0, sim.steps, mode, Some(noise))?;
            record(&traj, Some(seed))?;
        }
    }
    if let Some(out) = out {
        let rows: Vec<SimulationRow> = summaries
            .iter()
            .map(|s| SimulationRow {
                mode: s.mode,
                seed: s.seed,
                steps: s.steps,
                terminal_distance: s.terminal_distance,
                cost: s.cost,
                clamp_events: s.clamp_events,
            })
            .collect();
        io::write_table(&rows, io::create(&out.join("simulation.csv"))?)?;
    }
    Ok(summaries)
}

#[derive(Serialize)]
struct SimulationRow {
    mode: LoopMode,
    seed: Option<u64>,
    steps: usize,
    terminal_distance: f64,
    cost: f64,
    clamp_events: usize,
}

/// Solves for every `k` and method of the `convergence` section.
pub fn convergence(cfg: &RunConfig) -> Result<Vec<ConvergenceRow>> {
    let conv = cfg
        .convergence
        .as_ref()
        .ok_or_else(|| Error::Config("missing `convergence` section".into()))?;
    if cfg.problem_config()?.exact().is_none() {
        return Err(Error::Unsupported(
            "convergence tables need a problem with a closed-form solution".into(),
        ));
    }
    let mut rows = Vec::new();
    for &k in &conv.ks {
        for &method in &conv.methods {
            let mut c = cfg.clone();
            c.k = Some(k);
            c.minimizer.method = method;
            let s = solve(&c)?;
            let (v, u) = (s.summary.value_error.unwrap(), s.summary.control_error.unwrap());
            rows.push(ConvergenceRow {
                k,
                method: method.name().into(),
                l1_value: v.l1,
                l1_control: u.l1,
                l1_mean_value: v.l1_mean,
                l1_mean_control: u.l1_mean,
                sweeps: s.summary.sweeps,
                wall_time: s.summary.wall_time,
            });
        }
    }
    Ok(rows)
}

/// Runs the minimizer benchmark and writes `bench.csv` and
/// `bench_summary.csv`.
pub fn bench_minimizers(cfg: &RunConfig, out: Option<&Path>) -> Result<Vec<bench::BenchSummary>> {
    let bc = cfg.bench.clone().unwrap_or_default();
    if bc.instances == 0 || bc.oracle_points == 0 {
        return Err(Error::Config(
            "bench needs positive instance and oracle point counts".into(),
        ));
    }
    cfg.minimizer.validate()?;
    let rows = bench::run(&bc, &cfg.minimizer, cfg.seed);
    let summary = bench::summarize(&rows);
    if let Some(out) = out {
        io::write_table(&rows, io::create(&out.join("bench.csv"))?)?;
        io::write_table(&summary, io::create(&out.join("bench_summary.csv"))?)?;
    }
    Ok(summary)
}
