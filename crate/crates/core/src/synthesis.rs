//! Feedback extraction from a converged value function and Euler simulation
//! of open- and closed-loop trajectories.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{decompose, SectorSet};
use crate::error::{Error, Result};
use crate::grid::{Point, ScalarField, VectorField, MAX_DIM};
use crate::local::assemble_at;
use crate::minimize::{minimize_node, MinimizerResult};
use crate::solver::{Mode, ProblemSpec};

/// Local minimization at an arbitrary state `x`, using the patch of the
/// lower corner node of the cell containing `x`.
pub fn feedback_result(v: &ScalarField, spec: &ProblemSpec, x: &Point) -> Result<MinimizerResult> {
    let grid = &spec.grid;
    if v.grid() != grid {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: v.values().len(),
        });
    }
    let x = grid.clamp(x);
    let anchor = grid.anchor(&x);
    let costs: Vec<_> = decompose(&spec.dynamics, &spec.control, &x)
        .iter()
        .filter(|s| s.is_active())
        .map(|s: &SectorSet| assemble_at(&x, anchor, s, v, &spec.dynamics, &spec.cost, spec.h))
        .collect();
    if costs.is_empty() {
        return Err(Error::EmptySector {
            node: anchor,
            sector: "all".into(),
        });
    }
    let r = minimize_node(&costs, &spec.minimizer, None);
    if !r.value.is_finite() {
        return Err(Error::NonFinite {
            node: anchor,
            sector: r.sector.to_string(),
            value: r.value,
            control: r.u[..spec.control.m()].to_vec(),
        });
    }
    Ok(r)
}

pub fn feedback(v: &ScalarField, spec: &ProblemSpec, x: &Point) -> Result<Point> {
    feedback_result(v, spec, x).map(|r| r.u)
}

/// Feedback evaluated at every node.
pub fn control_field(v: &ScalarField, spec: &ProblemSpec) -> Result<VectorField> {
    let controls: Result<Vec<Point>> = spec
        .grid
        .nodes()
        .into_par_iter()
        .map(|node| feedback(v, spec, &spec.grid.coords(node)))
        .collect();
    VectorField::new(spec.grid.clone(), spec.control.m(), controls?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopMode {
    OpenLoop,
    ClosedLoop,
}

/// Additive noise, i.i.d. uniform on `[−a, a]` per component and step.
/// `structural` perturbs the state update, `output` the state seen by the
/// feedback law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub structural: f64,
    pub output: f64,
    pub seed: u64,
}

impl NoiseSpec {
    /// Both amplitudes set to `k/10`.
    pub fn default_for(k: f64, seed: u64) -> Self {
        NoiseSpec {
            structural: 0.1 * k,
            output: 0.1 * k,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub mode: LoopMode,
    pub noise: Option<NoiseSpec>,
    pub dim: usize,
    pub m: usize,
    pub times: Vec<f64>,
    pub states: Vec<Point>,
    /// Control applied on `[t_n, t_{n+1})`; the last entry repeats the
    /// previous one so that all arrays share the same length.
    pub controls: Vec<Point>,
    /// Accumulated discounted cost up to `t_n`.
    pub costs: Vec<f64>,
    /// Steps after which the state had to be clamped back into the domain.
    pub clamp_events: Vec<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn terminal_state(&self) -> &Point {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn total_cost(&self) -> f64 {
        *self.costs.last().unwrap_or(&0.0)
    }
}

fn uniform(rng: &mut ChaCha8Rng, amplitude: f64, d: usize) -> Point {
    let mut p = [0.0; MAX_DIM];
    if amplitude > 0.0 {
        for c in p.iter_mut().take(d) {
            *c = rng.gen_range(-amplitude..=amplitude);
        }
    }
    p
}

/// Explicit Euler simulation `y ← y + h f(y, u)` for `steps` steps.
///
/// Closed loop evaluates the feedback at the (noisy) observed state in every
/// step. Open loop replays the controls of the noise-free closed-loop
/// trajectory from `x0`. Minimum time runs stop once the target is reached.
pub fn simulate(
    v: &ScalarField,
    spec: &ProblemSpec,
    x0: &Point,
    steps: usize,
    mode: LoopMode,
    noise: Option<NoiseSpec>,
) -> Result<Trajectory> {
    let grid = &spec.grid;
    if !grid.contains(x0) {
        return Err(Error::InvalidProblem(format!(
            "initial state {:?} outside the domain",
            &x0[..grid.dim()]
        )));
    }
    let nominal = match mode {
        LoopMode::OpenLoop => Some(simulate(v, spec, x0, steps, LoopMode::ClosedLoop, None)?.controls),
        LoopMode::ClosedLoop => None,
    };
    let d = grid.dim();
    let m = spec.control.m();
    let h = spec.h;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.map_or(0, |n| n.seed));
    let (structural, output) = noise.map_or((0.0, 0.0), |n| (n.structural, n.output));

    let mut traj = Trajectory {
        mode,
        noise,
        dim: d,
        m,
        times: vec![0.0],
        states: vec![*x0],
        controls: Vec::new(),
        costs: vec![0.0],
        clamp_events: Vec::new(),
    };
    let mut y = *x0;
    let mut cost = 0.0;
    for n in 0..steps {
        if let Mode::MinimumTime { target } = &spec.mode {
            if target.contains(&y) {
                break;
            }
        }
        let u = match &nominal {
            Some(c) if n < c.len() - 1 => c[n],
            Some(_) => break,
            None => {
                let eta = uniform(&mut rng, output, d);
                let mut seen = y;
                for i in 0..d {
                    seen[i] += eta[i];
                }
                feedback(v, spec, &grid.clamp(&seen))?
            }
        };
        let t = n as f64 * h;
        cost += match spec.mode {
            Mode::InfiniteHorizon => (-spec.cost.lambda * t).exp() * h * spec.cost.eval(&y, &u, d, m),
            Mode::MinimumTime { .. } => h,
        };
        let f = spec.dynamics.eval(&y, &u);
        let xi = uniform(&mut rng, structural, d);
        let mut next = y;
        for i in 0..d {
            next[i] += h * f[i] + xi[i];
        }
        if !grid.contains(&next) {
            next = grid.clamp(&next);
            traj.clamp_events.push(n);
        }
        y = next;
        traj.controls.push(u);
        traj.times.push((n + 1) as f64 * h);
        traj.states.push(y);
        traj.costs.push(cost);
    }
    let last = traj.controls.last().copied().unwrap_or([0.0; MAX_DIM]);
    traj.controls.push(last);
    Ok(traj)
}

/// Euclidean distance in the first `d` coordinates.
pub fn distance(a: &Point, b: &Point, d: usize) -> f64 {
    (0..d).map(|i| (a[i] - b[i]) * (a[i] - b[i])).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{AffineControlDynamics, ControlSet, DynamicsModel};
    use crate::grid::Grid;
    use crate::local::RunningCost;
    use crate::reference::ExactEikonalSolution;

    fn eikonal(k: f64) -> (ProblemSpec, ScalarField) {
        let spec = ProblemSpec::new(
            Grid::cube(2, -1.0, 1.0, k).unwrap(),
            AffineControlDynamics::new(DynamicsModel::Eikonal { dim: 2 }),
            ControlSet::ball(2, 1.0).unwrap(),
            RunningCost::quadratic(0.1, 2.0),
            2f64.sqrt() / 4.0 * k,
            Mode::InfiniteHorizon,
        );
        let v = ExactEikonalSolution::new(0.1, 2.0).unwrap().value_field(&spec.grid);
        (spec, v)
    }

    #[test]
    fn feedback_points_to_origin() {
        let (spec, v) = eikonal(0.1);
        let u = feedback(&v, &spec, &[0.5, 0.0, 0.0]).unwrap();
        assert!(u[0] < 0.0 && u[1].abs() < 1e-6, "{u:?}");
        let u = feedback(&v, &spec, &[0.0; 3]).unwrap();
        assert!(u[0].abs() < 1e-12 && u[1].abs() < 1e-12);
    }

    #[test]
    fn off_node_feedback_is_feasible() {
        let (spec, v) = eikonal(0.1);
        for x in [[0.33, -0.71, 0.0], [-0.999, 0.999, 0.0], [0.05, 0.05, 0.0]] {
            let u = feedback(&v, &spec, &x).unwrap();
            assert!(spec.control.contains(&u, 1e-8), "{u:?}");
            assert!(u[0] * x[0] <= 1e-12 && u[1] * x[1] <= 1e-12, "{x:?} -> {u:?}");
        }
    }

    #[test]
    fn noise_free_loops_coincide() {
        let (spec, v) = eikonal(0.1);
        let x0 = [0.6, -0.2, 0.0];
        let a = simulate(&v, &spec, &x0, 40, LoopMode::ClosedLoop, None).unwrap();
        let b = simulate(&v, &spec, &x0, 40, LoopMode::OpenLoop, None).unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(a.costs, b.costs);
        assert_eq!(a.len(), 41);
        assert_eq!(a.controls.len(), a.states.len());
    }

    #[test]
    fn radial_decrease_from_ring() {
        let (spec, v) = eikonal(0.1);
        let x0 = [0.8, 0.0, 0.0];
        let t = simulate(&v, &spec, &x0, 60, LoopMode::ClosedLoop, None).unwrap();
        for w in t.states.windows(2) {
            assert!(distance(&w[1], &[0.0; 3], 2) <= distance(&w[0], &[0.0; 3], 2) + 1e-12);
        }
        assert!(t.total_cost() > 0.0);
    }

    #[test]
    fn seeded_runs_repeat() {
        let (spec, v) = eikonal(0.1);
        let noise = Some(NoiseSpec::default_for(0.1, 7));
        let x0 = [0.3, 0.4, 0.0];
        let a = simulate(&v, &spec, &x0, 25, LoopMode::ClosedLoop, noise).unwrap();
        let b = simulate(&v, &spec, &x0, 25, LoopMode::ClosedLoop, noise).unwrap();
        assert_eq!(a, b);
        let c = simulate(
            &v,
            &spec,
            &x0,
            25,
            LoopMode::ClosedLoop,
            Some(NoiseSpec::default_for(0.1, 8)),
        )
        .unwrap();
        assert_ne!(a.states, c.states);
    }
}
