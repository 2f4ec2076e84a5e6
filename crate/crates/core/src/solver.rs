//! Fixed-point iteration `V ← G(V)` of the semi-Lagrangian scheme.

use std::time::{Duration, Instant};

use log::{debug, info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{decompose, max_timestep, AffineControlDynamics, ControlSet, SectorSet};
use crate::error::{Error, Result};
use crate::grid::{Grid, Point, ScalarField, VectorField, MAX_DIM};
use crate::local::{assemble, RunningCost};
use crate::minimize::{minimize_node, MinimizerConfig, MinimizerResult, WarmStart};

/// Target set of a minimum time problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "shape", deny_unknown_fields)]
pub enum Target {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl Target {
    pub fn contains(&self, x: &Point) -> bool {
        match self {
            Target::Ball { center, radius } => {
                let d2: f64 = center.iter().enumerate().map(|(i, c)| (x[i] - c) * (x[i] - c)).sum();
                d2 <= radius * radius * (1.0 + 1e-12)
            }
            Target::Box { lower, upper } => (0..lower.len()).all(|i| x[i] >= lower[i] && x[i] <= upper[i]),
        }
    }

    fn dim(&self) -> usize {
        match self {
            Target::Ball { center, .. } => center.len(),
            Target::Box { lower, .. } => lower.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Mode {
    InfiniteHorizon,
    MinimumTime { target: Target },
}

/// Norm used by the stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualNorm {
    #[default]
    Sup,
    L1Mean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub grid: Grid,
    pub dynamics: AffineControlDynamics,
    pub control: ControlSet,
    pub cost: RunningCost,
    pub h: f64,
    pub mode: Mode,
    pub minimizer: MinimizerConfig,
    pub stop_tol: f64,
    pub residual_norm: ResidualNorm,
    pub max_sweeps: usize,
}

impl ProblemSpec {
    /// Spec with the default stopping rule `‖V^{n+1} − V^n‖∞ ≤ k²/5`.
    pub fn new(
        grid: Grid,
        dynamics: AffineControlDynamics,
        control: ControlSet,
        cost: RunningCost,
        h: f64,
        mode: Mode,
    ) -> Self {
        let stop_tol = grid.k() * grid.k() / 5.0;
        ProblemSpec {
            grid,
            dynamics,
            control,
            cost,
            h,
            mode,
            minimizer: MinimizerConfig::default(),
            stop_tol,
            residual_norm: ResidualNorm::Sup,
            max_sweeps: 10_000,
        }
    }

    pub fn max_timestep(&self) -> f64 {
        max_timestep(&self.dynamics, &self.control, &self.grid)
    }

    pub fn validate(&self) -> Result<()> {
        self.dynamics.validate()?;
        self.cost.validate()?;
        self.minimizer.validate()?;
        let d = self.grid.dim();
        if self.dynamics.state_dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: self.dynamics.state_dim(),
            });
        }
        if self.dynamics.control_dim() != self.control.m() {
            return Err(Error::DimensionMismatch {
                expected: self.dynamics.control_dim(),
                got: self.control.m(),
            });
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidProblem(format!("time step {} must be positive", self.h)));
        }
        let h_max = self.max_timestep();
        if self.h > h_max * (1.0 + 1e-12) {
            return Err(Error::InfeasibleTimestep { h: self.h, h_max });
        }
        if !self.cost.is_minimum_time() && self.cost.lambda * self.h >= 1.0 {
            return Err(Error::InvalidProblem("lambda * h must be below 1".into()));
        }
        match &self.mode {
            Mode::InfiniteHorizon if self.cost.is_minimum_time() => {
                return Err(Error::InvalidProblem(
                    "minimum time cost needs minimum time mode".into(),
                ))
            }
            Mode::MinimumTime { .. } if !self.cost.is_minimum_time() => {
                return Err(Error::InvalidProblem(
                    "minimum time mode needs a minimum time cost".into(),
                ))
            }
            Mode::MinimumTime { target } if target.dim() != d => {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: target.dim(),
                })
            }
            _ => {}
        }
        if !(self.stop_tol > 0.0) {
            return Err(Error::InvalidProblem("stop tolerance must be positive".into()));
        }
        Ok(())
    }

    pub fn is_target_node(&self, node: usize) -> bool {
        match &self.mode {
            Mode::MinimumTime { target } => target.contains(&self.grid.coords(node)),
            Mode::InfiniteHorizon => false,
        }
    }

    /// Zero field for infinite horizon problems; for minimum time `0` on the
    /// target and the upper bound `1` of the transformed value elsewhere.
    pub fn initial_field(&self) -> ScalarField {
        match &self.mode {
            Mode::InfiniteHorizon => ScalarField::constant(&self.grid, 0.0),
            Mode::MinimumTime { target } => {
                ScalarField::from_fn(&self.grid, |x| if target.contains(x) { 0.0 } else { 1.0 })
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub sweeps: usize,
    pub converged: bool,
    pub residual_history: Vec<f64>,
    /// Mean inner iterations per solved node, one entry per sweep.
    pub avg_subiterations: Vec<f64>,
    /// Node solves that needed a fallback routine, per sweep.
    pub fallbacks: Vec<usize>,
    pub wall_time: Duration,
    pub value: ScalarField,
    pub control: VectorField,
}

/// Sup-norm of the nodal difference.
pub fn residual(new: &ScalarField, old: &ScalarField) -> f64 {
    new.values()
        .iter()
        .zip(old.values())
        .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}

/// Mean absolute nodal difference.
pub fn residual_l1_mean(new: &ScalarField, old: &ScalarField) -> f64 {
    let n = new.values().len().max(1) as f64;
    new.values()
        .iter()
        .zip(old.values())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / n
}

/// Active sector sets of every node, independent of the value function.
pub fn node_sectors(spec: &ProblemSpec) -> Vec<Vec<SectorSet>> {
    spec.grid
        .nodes()
        .into_par_iter()
        .map(|node| {
            let x = spec.grid.coords(node);
            decompose(&spec.dynamics, &spec.control, &x)
                .into_iter()
                .filter(SectorSet::is_active)
                .collect()
        })
        .collect()
}

/// Minimizer of the discrete Hamiltonian at one node.
pub fn solve_node(
    spec: &ProblemSpec,
    field: &ScalarField,
    node: usize,
    sectors: &[SectorSet],
    warm: Option<&Point>,
) -> Result<MinimizerResult> {
    if sectors.is_empty() {
        return Err(Error::EmptySector {
            node,
            sector: "all".into(),
        });
    }
    let costs: Vec<_> = sectors
        .iter()
        .map(|s| assemble(node, s, field, &spec.dynamics, &spec.cost, spec.h))
        .collect();
    let r = minimize_node(&costs, &spec.minimizer, warm);
    if !r.value.is_finite() || !r.u.iter().all(|c| c.is_finite()) {
        return Err(Error::NonFinite {
            node,
            sector: r.sector.to_string(),
            value: r.value,
            control: r.u[..spec.control.m()].to_vec(),
        });
    }
    Ok(r)
}

struct Sweep {
    values: Vec<f64>,
    controls: Vec<Point>,
    iterations: usize,
    solved: usize,
    fallbacks: usize,
}

fn sweep(
    spec: &ProblemSpec,
    field: &ScalarField,
    sectors: &[Vec<SectorSet>],
    targets: &[bool],
    warm: Option<&[Point]>,
) -> Result<Sweep> {
    let results: Vec<Result<Option<MinimizerResult>>> = spec
        .grid
        .nodes()
        .into_par_iter()
        .map(|node| {
            if targets[node] {
                return Ok(None);
            }
            let w = warm.map(|w| &w[node]);
            solve_node(spec, field, node, &sectors[node], w).map(Some)
        })
        .collect();
    let n = spec.grid.len();
    let mut out = Sweep {
        values: vec![0.0; n],
        controls: vec![[0.0; MAX_DIM]; n],
        iterations: 0,
        solved: 0,
        fallbacks: 0,
    };
    for (node, r) in results.into_iter().enumerate() {
        if let Some(r) = r? {
            out.values[node] = r.value;
            out.controls[node] = r.u;
            out.iterations += r.iterations;
            out.solved += 1;
            out.fallbacks += r.fallback as usize;
        }
    }
    Ok(out)
}

/// One application of the discrete Bellman operator.
pub fn apply_operator(spec: &ProblemSpec, field: &ScalarField) -> Result<ScalarField> {
    let sectors = node_sectors(spec);
    let targets: Vec<bool> = spec.grid.nodes().map(|n| spec.is_target_node(n)).collect();
    let s = sweep(spec, field, &sectors, &targets, None)?;
    ScalarField::new(spec.grid.clone(), s.values)
}

/// Iterates `V ← G(V)` from `v0` (or [`ProblemSpec::initial_field`]) until
/// the residual drops to `stop_tol` or `max_sweeps` is reached.
pub fn value_iteration(spec: &ProblemSpec, v0: Option<ScalarField>) -> Result<SolveReport> {
    spec.validate()?;
    let start = Instant::now();
    let mut field = v0.unwrap_or_else(|| spec.initial_field());
    if field.grid() != &spec.grid {
        return Err(Error::DimensionMismatch {
            expected: spec.grid.len(),
            got: field.values().len(),
        });
    }
    if !field.is_finite() {
        return Err(Error::InvalidProblem("initial field is not finite".into()));
    }
    let targets: Vec<bool> = spec.grid.nodes().map(|n| spec.is_target_node(n)).collect();
    for (node, &t) in targets.iter().enumerate() {
        if t {
            field.values_mut()[node] = 0.0;
        }
    }
    let sectors = node_sectors(spec);
    let use_warm = spec.minimizer.warm_start == WarmStart::PreviousControl;

    let mut controls: Option<Vec<Point>> = None;
    let mut residual_history = Vec::new();
    let mut avg_subiterations = Vec::new();
    let mut fallbacks = Vec::new();
    let mut converged = false;
    while residual_history.len() < spec.max_sweeps {
        let warm = if use_warm { controls.as_deref() } else { None };
        let s = sweep(spec, &field, &sectors, &targets, warm)?;
        let next = ScalarField::new(spec.grid.clone(), s.values)?;
        let r = match spec.residual_norm {
            ResidualNorm::Sup => residual(&next, &field),
            ResidualNorm::L1Mean => residual_l1_mean(&next, &field),
        };
        residual_history.push(r);
        avg_subiterations.push(s.iterations as f64 / s.solved.max(1) as f64);
        fallbacks.push(s.fallbacks);
        if s.fallbacks > 0 {
            debug!(
                "sweep {}: {} node solves fell back",
                residual_history.len(),
                s.fallbacks
            );
        }
        field = next;
        controls = Some(s.controls);
        if r <= spec.stop_tol {
            converged = true;
            break;
        }
    }
    let sweeps = residual_history.len();
    if converged {
        info!("converged after {sweeps} sweeps");
    } else {
        warn!(
            "no convergence after {sweeps} sweeps (residual {:?})",
            residual_history.last()
        );
    }
    let control = VectorField::new(
        spec.grid.clone(),
        spec.control.m(),
        controls.unwrap_or_else(|| vec![[0.0; MAX_DIM]; spec.grid.len()]),
    )?;
    Ok(SolveReport {
        sweeps,
        converged,
        residual_history,
        avg_subiterations,
        fallbacks,
        wall_time: start.elapsed(),
        value: field,
        control,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::DynamicsModel;

    fn small_spec(k: f64) -> ProblemSpec {
        ProblemSpec::new(
            Grid::cube(2, -1.0, 1.0, k).unwrap(),
            AffineControlDynamics::new(DynamicsModel::Eikonal { dim: 2 }),
            ControlSet::ball(2, 1.0).unwrap(),
            RunningCost::quadratic(0.1, 2.0),
            2f64.sqrt() / 4.0 * k,
            Mode::InfiniteHorizon,
        )
    }

    #[test]
    fn residual_examples() {
        let g = Grid::cube(2, 0.0, 1.0, 0.5).unwrap();
        let a = ScalarField::constant(&g, 1.0);
        assert_eq!(residual(&a, &a), 0.0);
        let mut b = a.clone();
        b.values_mut()[4] += 0.25;
        assert_eq!(residual(&b, &a), 0.25);
    }

    #[test]
    fn rejects_large_timestep() {
        let mut spec = small_spec(0.25);
        spec.h = 0.25;
        assert!(matches!(spec.validate(), Err(Error::InfeasibleTimestep { .. })));
    }

    #[test]
    fn coarse_solve_converges() {
        let spec = small_spec(0.25);
        let report = value_iteration(&spec, None).unwrap();
        assert!(report.converged);
        assert!(report.value.is_finite());
        assert!(*report.residual_history.last().unwrap() <= spec.stop_tol);
        // value at the origin is zero by symmetry
        let origin = spec.grid.node_at(&[0.0; 3]).unwrap();
        assert!(report.value[origin].abs() < 1e-12);
    }
}
