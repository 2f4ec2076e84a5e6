//! Inner solvers for the local problems `min_{u ∈ U_I} F(u)` and the
//! per-node comparison across sectors.

mod chambolle_pock;
mod linalg;
mod points;
mod sphere;
mod splitting;
mod ssn;
mod ssn_l1;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Point, Sector};
use crate::local::{Family, LocalCost};

pub use chambolle_pock::chambolle_pock;
pub use points::{comparison, comparison_points, oracle, PointLayout};
pub use sphere::sphere_newton;
pub use splitting::splitting;
pub use ssn::{smooth_residual, ssn_smooth};
pub use ssn_l1::{ssn_l1, ssn_l1_ball, ssn_l1_box};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Pick a routine from the cost family and constraint type.
    #[default]
    Auto,
    Comparison,
    ChambollePock,
    SsnSmooth,
    /// Ball or box variant chosen from the sector.
    #[serde(alias = "ssn_l1_ball", alias = "ssn_l1_box")]
    SsnL1,
    SphereNewton,
    Splitting,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Auto,
        Method::Comparison,
        Method::ChambollePock,
        Method::SsnSmooth,
        Method::SsnL1,
        Method::SphereNewton,
        Method::Splitting,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Auto => "auto",
            Method::Comparison => "comparison",
            Method::ChambollePock => "chambolle_pock",
            Method::SsnSmooth => "ssn_smooth",
            Method::SsnL1 => "ssn_l1",
            Method::SphereNewton => "sphere_newton",
            Method::Splitting => "splitting",
        }
    }

    /// Whether the routine applies to `lc` without falling back.
    pub fn applies_to(self, lc: &LocalCost) -> bool {
        let ball = lc.sector.is_ball();
        let smooth = matches!(lc.family(), Family::Quadratic | Family::MinimumTime);
        match self {
            Method::Auto | Method::Comparison => true,
            Method::ChambollePock => lc.is_convex() && (lc.bilinear == 0.0 || smooth),
            Method::SsnSmooth => smooth && ball && lc.sector.is_cone() && lc.is_convex(),
            Method::SsnL1 => lc.is_convex() && (!ball || lc.sector.is_cone()),
            Method::SphereNewton => sphere::applies(lc),
            Method::Splitting => lc.is_convex(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmStart {
    None,
    #[default]
    PreviousControl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimizerConfig {
    pub method: Method,
    /// Stopping tolerance `η` on the iterate displacement.
    pub tolerance: f64,
    pub max_iters: usize,
    pub warm_start: WarmStart,
    /// Primal step of Chambolle-Pock.
    pub tau: f64,
    /// Dual step of Chambolle-Pock.
    pub sigma: f64,
    /// Extrapolation weight of Chambolle-Pock.
    pub theta: f64,
    /// Fixed-point scaling of the smooth semismooth Newton system; `None`
    /// means `1 / max(1, ‖∇²F‖∞)`.
    pub ssn_scale: Option<f64>,
    /// Ramp width of the ℓ1 semismooth Newton methods; `None` means
    /// `max(1, ‖∇²F‖∞)`.
    pub epsilon: Option<f64>,
    /// Halve Newton steps that do not decrease the residual.
    pub line_search: bool,
    pub points: PointLayout,
    /// Record residual histories in results.
    #[serde(skip)]
    pub trace: bool,
}

impl Default for MinimizerConfig {
    fn default() -> Self {
        MinimizerConfig {
            method: Method::Auto,
            tolerance: 1e-4,
            max_iters: 1000,
            warm_start: WarmStart::PreviousControl,
            tau: 0.7,
            sigma: 0.7,
            theta: 1.0,
            ssn_scale: None,
            epsilon: None,
            line_search: true,
            points: PointLayout::default(),
            trace: false,
        }
    }
}

impl MinimizerConfig {
    pub fn with_method(method: Method) -> Self {
        MinimizerConfig {
            method,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.tolerance > 0.0) {
            return bad(format!("tolerance {} must be positive", self.tolerance));
        }
        if !(self.tau > 0.0 && self.sigma > 0.0 && self.tau * self.sigma <= 1.0) {
            return bad(format!(
                "need tau, sigma > 0 and tau*sigma <= 1, got {} and {}",
                self.tau, self.sigma
            ));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return bad(format!("theta {} outside [0, 1]", self.theta));
        }
        if let Some(s) = self.ssn_scale {
            if !(s > 0.0 && s <= 1.0) {
                return bad(format!("ssn_scale {s} outside (0, 1]"));
            }
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0) {
                return bad(format!("epsilon {e} must be positive"));
            }
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive".into());
        }
        self.points.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizerResult {
    pub u: Point,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub sector: Sector,
    /// The requested routine did not apply or failed and another one produced
    /// this result.
    pub fallback: bool,
    /// Residual norms per iterate, filled when tracing.
    pub residuals: Vec<f64>,
}

impl MinimizerResult {
    fn new(lc: &LocalCost, u: Point, iterations: usize, converged: bool) -> Self {
        MinimizerResult {
            value: lc.eval(&u),
            u,
            iterations,
            converged,
            sector: lc.sector.sector,
            fallback: false,
            residuals: Vec::new(),
        }
    }

    fn flagged(mut self) -> Self {
        self.fallback = true;
        self
    }
}

/// Routine used by [`Method::Auto`] for one local problem.
pub fn auto_method(lc: &LocalCost) -> Method {
    let ball = lc.sector.is_ball();
    let boundary = Method::SphereNewton.applies_to(lc);
    if !lc.is_convex() {
        return if boundary {
            Method::SphereNewton
        } else {
            Method::Comparison
        };
    }
    match lc.family() {
        Family::Quadratic if ball => Method::SsnSmooth,
        Family::Quadratic => Method::ChambollePock,
        Family::MinimumTime if boundary => Method::SphereNewton,
        Family::MinimumTime => Method::ChambollePock,
        Family::L1 | Family::QuadraticL1 => Method::SsnL1,
    }
}

/// Minimizes one local problem with the configured routine.
pub fn minimize(lc: &LocalCost, cfg: &MinimizerConfig, warm: Option<&Point>) -> MinimizerResult {
    let method = match cfg.method {
        Method::Auto => auto_method(lc),
        m => m,
    };
    match method {
        Method::Auto => unreachable!(),
        Method::Comparison => {
            let pts = comparison_points(lc, &cfg.points);
            comparison(lc, &pts)
        }
        Method::ChambollePock => chambolle_pock(lc, cfg, warm),
        Method::SsnSmooth => ssn_smooth(lc, cfg, warm),
        Method::SsnL1 => ssn_l1(lc, cfg, warm),
        Method::SphereNewton => sphere_newton(lc, cfg),
        Method::Splitting => splitting(lc, cfg, warm),
    }
}

/// Minimizes over every sector and keeps the smallest value; ties go to the
/// earliest entry, so `costs` should be in lexicographic sector order.
/// Iterations are summed over sectors; the result counts as converged if any
/// sector solve converged.
pub fn minimize_node(costs: &[LocalCost], cfg: &MinimizerConfig, warm: Option<&Point>) -> MinimizerResult {
    assert!(!costs.is_empty(), "minimize_node needs at least one sector");
    let mut best: Option<MinimizerResult> = None;
    let mut iterations = 0;
    let mut converged = false;
    let mut fallback = false;
    for lc in costs {
        let r = minimize(lc, cfg, warm);
        iterations += r.iterations;
        converged |= r.converged;
        fallback |= r.fallback;
        if best.as_ref().is_none_or(|b| r.value < b.value) {
            best = Some(r);
        }
    }
    let mut best = best.unwrap();
    best.iterations = iterations;
    best.converged = converged;
    best.fallback = fallback;
    best
}

/// Warm start mapped into the sector, or the sector's default start point.
fn start_point(lc: &LocalCost, warm: Option<&Point>) -> Point {
    match warm {
        Some(w) if w[..lc.m].iter().all(|c| c.is_finite()) => lc.sector.project(w),
        _ => lc.sector.initial_point(),
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{decompose, AffineControlDynamics, ControlSet, DynamicsModel};

    fn eikonal_costs(linear: Point, quad: f64) -> Vec<LocalCost> {
        let u = ControlSet::ball(2, 1.0).unwrap();
        let dynamics = AffineControlDynamics::new(DynamicsModel::Eikonal { dim: 2 });
        decompose(&dynamics, &u, &[0.0; 3])
            .into_iter()
            .filter(|s| s.is_active())
            .map(|s| {
                let mut lc = LocalCost::on(&u);
                lc.sector = s;
                lc.quad = [quad, quad, 0.0];
                lc.linear = linear;
                lc.constant = 0.25;
                lc
            })
            .collect()
    }

    #[test]
    fn flat_costs_return_origin() {
        let costs = eikonal_costs([0.0; 3], 0.0);
        for method in [Method::Auto, Method::ChambollePock, Method::Comparison] {
            let r = minimize_node(&costs, &MinimizerConfig::with_method(method), Some(&[0.0; 3]));
            assert_eq!(r.value, 0.25, "{method:?}");
            assert!(r.u[..2].iter().all(|c| c.abs() < 1e-12), "{method:?}: {:?}", r.u);
            assert_eq!(r.sector, Sector::from_bits(0));
        }
    }

    #[test]
    fn eikonal_quadratic_picks_descent_sector() {
        let h = 2f64.sqrt() / 4.0 * 0.05;
        let beta = 1.0 - 0.1 * h;
        let costs = eikonal_costs([-beta * h * 0.5, 0.0, 0.0], 2.0 * h);
        let r = minimize_node(&costs, &MinimizerConfig::default(), None);
        assert!(r.sector.contains(0));
        // unconstrained optimum -d/a = 0.25 lies inside the ball
        assert!((r.u[0] - 0.25 * beta).abs() < 1e-8, "{:?}", r.u);
        assert!(r.u[1].abs() < 1e-8);
        let o = oracle(&costs[0], 1_000_000);
        let best_oracle = costs.iter().map(|c| oracle(c, 250_000).value).fold(o.value, f64::min);
        assert!(r.value <= best_oracle + 1e-12);
    }

    #[test]
    fn constraint_specific_names_select_ssn_l1() {
        for name in ["\"ssn_l1\"", "\"ssn_l1_ball\"", "\"ssn_l1_box\""] {
            assert_eq!(serde_json::from_str::<Method>(name).unwrap(), Method::SsnL1);
        }
    }

    #[test]
    fn config_validation() {
        assert!(MinimizerConfig::default().validate().is_ok());
        for cfg in [
            MinimizerConfig {
                tau: 2.0,
                ..Default::default()
            },
            MinimizerConfig {
                theta: 1.5,
                ..Default::default()
            },
            MinimizerConfig {
                epsilon: Some(0.0),
                ..Default::default()
            },
        ] {
            assert!(cfg.validate().is_err());
        }
    }
}
