//! Run configuration files and the built-in problem registry.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::{AffineControlDynamics, ControlSet, DynamicsModel, SpeedStep};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::local::{CostKind, RunningCost};
use crate::minimize::{Method, MinimizerConfig};
use crate::reference::ExactEikonalSolution;
use crate::solver::{Mode, ProblemSpec, ResidualNorm, Target};
use crate::synthesis::LoopMode;

pub const REGISTRY: [&str; 6] = ["test1", "test1-disc", "test2", "test3", "test4", "test5"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "shape", deny_unknown_fields)]
pub enum ControlConfig {
    Ball { radius: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

/// Time step as a multiple of `k` or as a fixed value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", deny_unknown_fields)]
pub enum StepRule {
    Scaled { factor: f64 },
    Fixed { value: f64 },
}

impl StepRule {
    pub fn step(&self, k: f64) -> f64 {
        match *self {
            StepRule::Scaled { factor } => factor * k,
            StepRule::Fixed { value } => value,
        }
    }
}

fn infinite_horizon() -> Mode {
    Mode::InfiniteHorizon
}

/// Full description of a problem, as stored in the registry or given inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub k: f64,
    pub dynamics: DynamicsModel,
    #[serde(default)]
    pub speed: Option<SpeedStep>,
    pub control: ControlConfig,
    pub cost: RunningCost,
    pub h: StepRule,
    #[serde(default = "infinite_horizon")]
    pub mode: Mode,
}

impl ProblemConfig {
    pub fn registry(name: &str) -> Result<Self> {
        let eikonal2 = |k: f64| ProblemConfig {
            lower: vec![-1.0; 2],
            upper: vec![1.0; 2],
            k,
            dynamics: DynamicsModel::Eikonal { dim: 2 },
            speed: None,
            control: ControlConfig::Ball { radius: 1.0 },
            cost: RunningCost::quadratic(0.1, 2.0),
            h: StepRule::Scaled {
                factor: 2f64.sqrt() / 4.0,
            },
            mode: Mode::InfiniteHorizon,
        };
        let cfg = match name {
            "test1" => eikonal2(0.05),
            "test1-disc" => ProblemConfig {
                speed: Some(SpeedStep {
                    axis: 1,
                    threshold: 0.5,
                    jump: 1.0,
                }),
                ..eikonal2(0.05)
            },
            "test2" => ProblemConfig {
                lower: vec![-1.0; 3],
                upper: vec![1.0; 3],
                k: 0.1,
                dynamics: DynamicsModel::Eikonal { dim: 3 },
                h: StepRule::Scaled { factor: 0.5 },
                ..eikonal2(0.1)
            },
            "test3" => ProblemConfig {
                lower: vec![-1.0; 3],
                upper: vec![1.0; 3],
                k: 0.05,
                dynamics: DynamicsModel::TripleIntegrator,
                speed: None,
                control: ControlConfig::Box {
                    lower: vec![-0.3; 2],
                    upper: vec![0.3; 2],
                },
                cost: RunningCost::quadratic(0.1, 2.0),
                h: StepRule::Scaled { factor: 0.2 },
                mode: Mode::InfiniteHorizon,
            },
            "test4" => ProblemConfig {
                cost: RunningCost::quadratic_l1(0.1, 2.0, 0.1),
                ..eikonal2(0.025)
            },
            "test5" => ProblemConfig {
                lower: vec![0.0; 3],
                upper: vec![2.0 * PI; 3],
                // 31 cells per axis, the divisor of 2π closest to 0.2
                k: 2.0 * PI / 31.0,
                dynamics: DynamicsModel::Car,
                speed: None,
                control: ControlConfig::Box {
                    lower: vec![-0.3; 2],
                    upper: vec![0.3; 2],
                },
                cost: RunningCost::quadratic_l1(0.1, 2.0, 0.5),
                h: StepRule::Scaled { factor: 0.2 },
                mode: Mode::InfiniteHorizon,
            },
            _ => {
                return Err(Error::Config(format!(
                    "unknown problem {name:?}; known problems: {}",
                    REGISTRY.join(", ")
                )))
            }
        };
        Ok(cfg)
    }

    /// Replaces `γ₁`; zero switches an ℓ1 cost back to the plain quadratic one.
    pub fn set_gamma1(&mut self, gamma1: f64) -> Result<()> {
        if !(gamma1 >= 0.0) {
            return Err(Error::Config(format!("gamma1 {gamma1} must be nonnegative")));
        }
        self.cost.kind = match self.cost.kind {
            CostKind::Quadratic { gamma2 } | CostKind::QuadraticL1 { gamma2, .. } if gamma1 == 0.0 => {
                CostKind::Quadratic { gamma2 }
            }
            CostKind::Quadratic { gamma2 } | CostKind::QuadraticL1 { gamma2, .. } => {
                CostKind::QuadraticL1 { gamma2, gamma1 }
            }
            CostKind::MinimumTime { .. } => CostKind::MinimumTime { gamma1 },
        };
        Ok(())
    }

    pub fn control_set(&self, m: usize) -> Result<ControlSet> {
        match &self.control {
            ControlConfig::Ball { radius } => ControlSet::ball(m, *radius),
            ControlConfig::Box { lower, upper } => ControlSet::box_set(lower, upper),
        }
    }

    pub fn to_spec(&self, minimizer: MinimizerConfig) -> Result<ProblemSpec> {
        let grid = Grid::new(&self.lower, &self.upper, self.k)?;
        let dynamics = match self.speed {
            Some(s) => AffineControlDynamics::with_speed(self.dynamics, s),
            None => AffineControlDynamics::new(self.dynamics),
        };
        dynamics.validate()?;
        let control = self.control_set(dynamics.control_dim())?;
        let h = self.h.step(self.k);
        let mut spec = ProblemSpec::new(grid, dynamics, control, self.cost, h, self.mode.clone());
        spec.minimizer = minimizer;
        spec.validate()?;
        Ok(spec)
    }

    /// Closed-form solution when the problem is the discounted eikonal
    /// problem with quadratic cost and unit ball controls.
    pub fn exact(&self) -> Option<ExactEikonalSolution> {
        let eikonal = matches!(self.dynamics, DynamicsModel::Eikonal { dim } if dim >= 2);
        let unit_ball = self.control == ControlConfig::Ball { radius: 1.0 };
        match self.cost.kind {
            CostKind::Quadratic { gamma2 }
                if eikonal
                    && unit_ball
                    && self.speed.is_none()
                    && self.mode == Mode::InfiniteHorizon
                    && self.cost.state_weight == 0.5 =>
            {
                ExactEikonalSolution::new(self.cost.lambda, gamma2).ok()
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Vtk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub value: bool,
    pub control: bool,
    pub report: bool,
    pub trajectory: bool,
    pub format: Format,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs {
            value: true,
            control: true,
            report: true,
            trajectory: true,
            format: Format::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub structural: f64,
    pub output: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub x0: Vec<f64>,
    pub steps: usize,
    #[serde(default = "both_modes")]
    pub modes: Vec<LoopMode>,
    /// Amplitudes of the additive noise; `k/10` each when absent.
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    /// Noisy runs per mode, seeded `seed, seed + 1, …`; 0 runs the
    /// noise-free trajectory only.
    #[serde(default)]
    pub runs: usize,
}

fn both_modes() -> Vec<LoopMode> {
    vec![LoopMode::ClosedLoop, LoopMode::OpenLoop]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub ks: Vec<f64>,
    pub methods: Vec<Method>,
}

/// Local problem families used by the minimizer benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchFamily {
    /// Convex quadratic over a ball quadrant.
    Cost2,
    /// Bilinear plus linear over a ball quadrant.
    Mt,
    /// Bilinear plus linear plus ℓ1 over a box.
    FunctionalMtIh,
    /// Convex quadratic plus ℓ1 over a ball quadrant.
    CostIh,
}

impl BenchFamily {
    pub const ALL: [BenchFamily; 4] = [
        BenchFamily::Cost2,
        BenchFamily::Mt,
        BenchFamily::FunctionalMtIh,
        BenchFamily::CostIh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchFamily::Cost2 => "cost_2",
            BenchFamily::Mt => "mt",
            BenchFamily::FunctionalMtIh => "functional_mt_ih",
            BenchFamily::CostIh => "cost_ih",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub families: Vec<BenchFamily>,
    /// Empty means every routine that applies to the family.
    pub methods: Vec<Method>,
    pub instances: usize,
    pub oracle_points: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            families: BenchFamily::ALL.to_vec(),
            methods: Vec::new(),
            instances: 100,
            oracle_points: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Registry name; exclusive with `inline`.
    #[serde(default)]
    pub problem: Option<String>,
    #[serde(default)]
    pub inline: Option<ProblemConfig>,
    /// Overrides the grid spacing (the time step rule is kept).
    #[serde(default)]
    pub k: Option<f64>,
    #[serde(default)]
    pub gamma1: Option<f64>,
    #[serde(default)]
    pub minimizer: MinimizerConfig,
    #[serde(default)]
    pub stop_tol: Option<f64>,
    #[serde(default)]
    pub residual_norm: ResidualNorm,
    #[serde(default)]
    pub max_sweeps: Option<usize>,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub simulation: Option<SimulationConfig>,
    #[serde(default)]
    pub convergence: Option<ConvergenceConfig>,
    #[serde(default)]
    pub bench: Option<BenchConfig>,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn for_problem(name: &str) -> Self {
        RunConfig {
            problem: Some(name.to_string()),
            inline: None,
            k: None,
            gamma1: None,
            minimizer: MinimizerConfig::default(),
            stop_tol: None,
            residual_norm: ResidualNorm::Sup,
            max_sweeps: None,
            outputs: Outputs::default(),
            simulation: None,
            convergence: None,
            bench: None,
            seed: 0,
        }
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|source| Error::ConfigParse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Problem description after applying the overrides.
    pub fn problem_config(&self) -> Result<ProblemConfig> {
        let mut p = match (&self.problem, &self.inline) {
            (Some(name), None) => ProblemConfig::registry(name)?,
            (None, Some(p)) => p.clone(),
            (Some(_), Some(_)) => return Err(Error::Config("give either `problem` or `inline`, not both".into())),
            (None, None) => return Err(Error::Config("missing `problem` or `inline`".into())),
        };
        if let Some(k) = self.k {
            p.k = k;
        }
        if let Some(g) = self.gamma1 {
            p.set_gamma1(g)?;
        }
        Ok(p)
    }

    pub fn spec(&self) -> Result<ProblemSpec> {
        let p = self.problem_config()?;
        self.spec_for(&p)
    }

    pub fn spec_for(&self, p: &ProblemConfig) -> Result<ProblemSpec> {
        let mut spec = p.to_spec(self.minimizer.clone())?;
        if let Some(t) = self.stop_tol {
            spec.stop_tol = t;
        }
        if let Some(n) = self.max_sweeps {
            spec.max_sweeps = n;
        }
        spec.residual_norm = self.residual_norm;
        spec.validate()?;
        Ok(spec)
    }
}

/// Ball target helper for minimum time configurations.
pub fn ball_target(center: &[f64], radius: f64) -> Mode {
    Mode::MinimumTime {
        target: Target::Ball {
            center: center.to_vec(),
            radius,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_resolves() {
        for name in REGISTRY {
            let spec = RunConfig::for_problem(name)
                .spec()
                .unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(spec.h <= spec.max_timestep() * (1.0 + 1e-12), "{name}");
        }
        let t1 = ProblemConfig::registry("test1").unwrap();
        assert!(t1.exact().is_some());
        assert!(ProblemConfig::registry("test1-disc").unwrap().exact().is_none());
        assert!(ProblemConfig::registry("test2").unwrap().exact().is_some());
        let spec = RunConfig::for_problem("test2").spec().unwrap();
        assert_eq!(spec.grid.dim(), 3);
        assert!((spec.h - 0.05).abs() < 1e-15);
        let spec = RunConfig::for_problem("test4").spec().unwrap();
        assert_eq!(spec.cost.gamma1(), 0.1);
        assert_eq!(spec.grid.k(), 0.025);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_json(r#"{"problem": "test1", "kk": 0.1}"#).unwrap_err();
        assert!(err.to_string().contains("kk"), "{err}");
        assert_eq!(err.line(), 1);
        assert!(
            RunConfig::from_json(r#"{"problem": "test1", "minimizer": {"method": "ssn_smooth", "tol": 1}}"#).is_err()
        );
    }

    #[test]
    fn overrides_apply() {
        let cfg = RunConfig::from_json(
            r#"{"problem": "test4", "k": 0.1, "gamma1": 0.5, "minimizer": {"method": "splitting"}}"#,
        )
        .unwrap();
        let spec = cfg.spec().unwrap();
        assert_eq!(spec.grid.k(), 0.1);
        assert_eq!(spec.cost.gamma1(), 0.5);
        assert_eq!(spec.minimizer.method, Method::Splitting);
        let mut cfg = RunConfig::for_problem("test5");
        cfg.gamma1 = Some(0.0);
        assert_eq!(cfg.spec().unwrap().cost.kind, CostKind::Quadratic { gamma2: 2.0 });
    }

    #[test]
    fn oversized_step_is_rejected() {
        let cfg = RunConfig::from_json(
            r#"{"inline": {"lower": [-1, -1], "upper": [1, 1], "k": 0.1,
                "dynamics": {"model": "eikonal", "dim": 2},
                "control": {"shape": "ball", "radius": 1},
                "cost": {"kind": {"type": "quadratic", "gamma2": 2}, "lambda": 0.1, "state_weight": 0.5},
                "h": {"rule": "scaled", "factor": 1.0}}}"#,
        )
        .unwrap();
        assert!(matches!(cfg.spec(), Err(Error::InfeasibleTimestep { .. })));
    }

    #[test]
    fn inline_round_trip() {
        let p = ProblemConfig::registry("test3").unwrap();
        let text = serde_json::to_string(&p).unwrap();
        let back: ProblemConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(p, back);
    }
}
