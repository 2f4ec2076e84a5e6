//! Per-node, per-sector polynomial surrogate of the discrete Hamiltonian.
//!
//! Composing the sector's affine interpolant with the arrival point
//! `x + h(g(x) + B(x)u)` gives a function of `u` that is affine, so together
//! with the running cost the local problem is
//!
//! ```text
//! F(u) = Σ (q_j/2) u_j² + b u_1 u_2 + Σ w_j |u_j| + Σ c_j u_j + r
//! ```
//!
//! minimized over the sector set `U_I`.

use serde::{Deserialize, Serialize};

use crate::control::{AffineControlDynamics, ControlSet, SectorSet};
use crate::error::{Error, Result};
use crate::grid::{sector_interpolant, Point, ScalarField, MAX_DIM};

/// Control part of the running cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", deny_unknown_fields)]
pub enum CostKind {
    /// `(γ₂/2)‖u‖²`
    Quadratic { gamma2: f64 },
    /// `(γ₂/2)‖u‖² + γ₁‖u‖₁`
    QuadraticL1 { gamma2: f64, gamma1: f64 },
    /// Kruzkov-transformed minimum time, optionally with `γ₁‖u‖₁`.
    MinimumTime {
        #[serde(default)]
        gamma1: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunningCost {
    pub kind: CostKind,
    /// Discount rate; ignored for minimum time.
    pub lambda: f64,
    /// Weight `w` of the state term `w‖x‖²`.
    pub state_weight: f64,
}

impl RunningCost {
    pub fn quadratic(lambda: f64, gamma2: f64) -> Self {
        RunningCost {
            kind: CostKind::Quadratic { gamma2 },
            lambda,
            state_weight: 0.5,
        }
    }

    pub fn quadratic_l1(lambda: f64, gamma2: f64, gamma1: f64) -> Self {
        RunningCost {
            kind: CostKind::QuadraticL1 { gamma2, gamma1 },
            lambda,
            state_weight: 0.5,
        }
    }

    pub fn minimum_time() -> Self {
        RunningCost {
            kind: CostKind::MinimumTime { gamma1: 0.0 },
            lambda: 0.0,
            state_weight: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidProblem(msg.to_string()));
        match self.kind {
            CostKind::Quadratic { gamma2 } | CostKind::QuadraticL1 { gamma2, .. } if !(gamma2 > 0.0) => {
                return bad("gamma2 must be positive")
            }
            _ => {}
        }
        if !(self.gamma1() >= 0.0) {
            return bad("gamma1 must be nonnegative");
        }
        if !self.is_minimum_time() && !(self.lambda > 0.0) {
            return bad("lambda must be positive");
        }
        if !(self.state_weight >= 0.0) {
            return bad("state weight must be nonnegative");
        }
        Ok(())
    }

    pub fn is_minimum_time(&self) -> bool {
        matches!(self.kind, CostKind::MinimumTime { .. })
    }

    pub fn gamma2(&self) -> f64 {
        match self.kind {
            CostKind::Quadratic { gamma2 } | CostKind::QuadraticL1 { gamma2, .. } => gamma2,
            CostKind::MinimumTime { .. } => 0.0,
        }
    }

    pub fn gamma1(&self) -> f64 {
        match self.kind {
            CostKind::Quadratic { .. } => 0.0,
            CostKind::QuadraticL1 { gamma1, .. } | CostKind::MinimumTime { gamma1 } => gamma1,
        }
    }

    /// Discount factor of one step: `1 − λh`, or `e^{−h}` for minimum time.
    pub fn beta(&self, h: f64) -> f64 {
        if self.is_minimum_time() {
            (-h).exp()
        } else {
            1.0 - self.lambda * h
        }
    }

    /// `l(x,u)`; for minimum time only the optional ℓ1 term (the unit time
    /// cost enters through `1 − β`).
    pub fn eval(&self, x: &Point, u: &Point, d: usize, m: usize) -> f64 {
        let xs: f64 = x[..d].iter().map(|v| v * v).sum();
        let u2: f64 = u[..m].iter().map(|v| v * v).sum();
        let u1: f64 = u[..m].iter().map(|v| v.abs()).sum();
        self.state_weight * xs + 0.5 * self.gamma2() * u2 + self.gamma1() * u1
    }
}

/// Structural class of a local problem, read off its zero pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Quadratic plus linear.
    Quadratic,
    /// Bilinear plus linear.
    MinimumTime,
    /// ℓ1 plus bilinear plus linear.
    L1,
    /// Quadratic plus ℓ1 plus linear.
    QuadraticL1,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Quadratic, Family::MinimumTime, Family::L1, Family::QuadraticL1];

    pub fn name(self) -> &'static str {
        match self {
            Family::Quadratic => "quadratic",
            Family::MinimumTime => "minimum_time",
            Family::L1 => "l1",
            Family::QuadraticL1 => "quadratic_l1",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalCost {
    pub m: usize,
    /// Diagonal quadratic coefficients (`a`, `c`, ...).
    pub quad: Point,
    /// Bilinear coefficient `b` of `u_1 u_2`.
    pub bilinear: f64,
    /// Linear coefficients (`d`, `e`, ...).
    pub linear: Point,
    /// ℓ1 weights (`l`, `s`, ...).
    pub l1: Point,
    /// Constant `r`.
    pub constant: f64,
    pub beta: f64,
    pub sector: SectorSet,
}

impl LocalCost {
    /// Local cost with the given coefficients on the whole control set.
    pub fn on(control: &ControlSet) -> Self {
        LocalCost {
            m: control.m(),
            quad: [0.0; MAX_DIM],
            bilinear: 0.0,
            linear: [0.0; MAX_DIM],
            l1: [0.0; MAX_DIM],
            constant: 0.0,
            beta: 1.0,
            sector: SectorSet::unrestricted(control),
        }
    }

    pub fn family(&self) -> Family {
        let has_quad = self.quad[..self.m].iter().any(|&q| q != 0.0);
        let has_l1 = self.l1[..self.m].iter().any(|&w| w != 0.0);
        match (has_quad, has_l1) {
            (true, false) => Family::Quadratic,
            (false, false) => Family::MinimumTime,
            (false, true) => Family::L1,
            (true, true) => Family::QuadraticL1,
        }
    }

    pub fn eval(&self, u: &Point) -> f64 {
        self.smooth(u) + (0..self.m).map(|j| self.l1[j] * u[j].abs()).sum::<f64>()
    }

    /// Value without the ℓ1 term.
    pub fn smooth(&self, u: &Point) -> f64 {
        let mut v = self.constant;
        for j in 0..self.m {
            v += 0.5 * self.quad[j] * u[j] * u[j] + self.linear[j] * u[j];
        }
        if self.m >= 2 {
            v += self.bilinear * u[0] * u[1];
        }
        v
    }

    /// Gradient of the smooth part.
    pub fn gradient(&self, u: &Point) -> Point {
        let mut g = [0.0; MAX_DIM];
        for j in 0..self.m {
            g[j] = self.quad[j] * u[j] + self.linear[j];
        }
        if self.m >= 2 {
            g[0] += self.bilinear * u[1];
            g[1] += self.bilinear * u[0];
        }
        g
    }

    /// Hessian of the smooth part (constant).
    pub fn hessian(&self) -> [[f64; MAX_DIM]; MAX_DIM] {
        let mut h = [[0.0; MAX_DIM]; MAX_DIM];
        for j in 0..self.m {
            h[j][j] = self.quad[j];
        }
        if self.m >= 2 {
            h[0][1] = self.bilinear;
            h[1][0] = self.bilinear;
        }
        h
    }

    pub fn is_convex(&self) -> bool {
        let q = &self.quad;
        q[..self.m].iter().all(|&v| v >= 0.0) && (self.m < 2 || q[0] * q[1] - self.bilinear * self.bilinear >= 0.0)
    }

    /// Same cost with control coordinates reflected by `signs` (`±1`), i.e.
    /// `G(v) = F(S v)`; sector bounds are reflected accordingly.
    pub fn reflect(&self, signs: &Point) -> LocalCost {
        let mut out = self.clone();
        for j in 0..self.m {
            out.linear[j] *= signs[j];
            if signs[j] < 0.0 {
                let (lo, hi) = (self.sector.lower[j], self.sector.upper[j]);
                out.sector.lower[j] = -hi;
                out.sector.upper[j] = -lo;
            }
        }
        if self.m >= 2 {
            out.bilinear *= signs[0] * signs[1];
        }
        for hs in out.sector.halfspaces.iter_mut() {
            for j in 0..self.m {
                hs.normal[j] *= signs[j];
            }
        }
        out
    }
}

/// Local problem at grid node `node` for one sector.
pub fn assemble(
    node: usize,
    sector: &SectorSet,
    field: &ScalarField,
    dynamics: &AffineControlDynamics,
    cost: &RunningCost,
    h: f64,
) -> LocalCost {
    let x = field.grid().coords(node);
    assemble_at(&x, node, sector, field, dynamics, cost, h)
}

/// Local problem for departure point `x` using the patch of grid node
/// `anchor`; `x` equals the anchor's coordinates for on-node solves.
pub fn assemble_at(
    x: &Point,
    anchor: usize,
    sector: &SectorSet,
    field: &ScalarField,
    dynamics: &AffineControlDynamics,
    cost: &RunningCost,
    h: f64,
) -> LocalCost {
    let d = dynamics.state_dim();
    let m = sector.m;
    let interp = sector_interpolant(field, anchor, sector.sector);
    let g = dynamics.drift(x);
    let b = dynamics.input(x);
    let beta = cost.beta(h);

    let mut linear = [0.0; MAX_DIM];
    for (j, c) in linear.iter_mut().enumerate().take(m) {
        *c = beta * h * (0..d).map(|i| interp.slopes[i] * b[i][j]).sum::<f64>();
    }
    let mut shift = 0.0;
    for i in 0..d {
        shift += interp.slopes[i] * (x[i] - interp.anchor[i] + h * g[i]);
    }
    let xs: f64 = x[..d].iter().map(|v| v * v).sum();
    let mut constant = beta * (interp.value + shift) + h * cost.state_weight * xs;
    if cost.is_minimum_time() {
        constant += 1.0 - beta;
    }
    let mut quad = [0.0; MAX_DIM];
    let mut l1 = [0.0; MAX_DIM];
    for j in 0..m {
        quad[j] = h * cost.gamma2();
        l1[j] = h * cost.gamma1();
    }
    LocalCost {
        m,
        quad,
        bilinear: 0.0,
        linear,
        l1,
        constant,
        beta,
        sector: sector.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{decompose, DynamicsModel};
    use crate::grid::Grid;

    fn setup() -> (Grid, AffineControlDynamics, ControlSet, RunningCost, f64) {
        let k = 0.05;
        (
            Grid::cube(2, -1.0, 1.0, k).unwrap(),
            AffineControlDynamics::new(DynamicsModel::Eikonal { dim: 2 }),
            ControlSet::ball(2, 1.0).unwrap(),
            RunningCost::quadratic(0.1, 2.0),
            2f64.sqrt() / 4.0 * k,
        )
    }

    #[test]
    fn zero_field_at_origin() {
        let (grid, dynamics, u, cost, h) = setup();
        let field = ScalarField::constant(&grid, 0.0);
        let node = grid.node_at(&[0.0, 0.0, 0.0]).unwrap();
        for s in decompose(&dynamics, &u, &grid.coords(node)) {
            let lc = assemble(node, &s, &field, &dynamics, &cost, h);
            assert_eq!(&lc.quad[..2], &[2.0 * h, 2.0 * h]);
            assert_eq!(&lc.linear[..2], &[0.0, 0.0]);
            assert_eq!(lc.constant, 0.0);
            assert_eq!(lc.family(), Family::Quadratic);
        }
    }

    #[test]
    fn affine_field_linear_term() {
        let (grid, dynamics, u, cost, h) = setup();
        let field = ScalarField::from_fn(&grid, |x| x[0]);
        let node = grid.linear(&[13, 22, 0]);
        let beta = 1.0 - 0.1 * h;
        for s in decompose(&dynamics, &u, &grid.coords(node)) {
            let lc = assemble(node, &s, &field, &dynamics, &cost, h);
            assert!((lc.linear[0] - beta * h).abs() < 1e-15);
            assert!(lc.linear[1].abs() < 1e-15);
        }
    }

    #[test]
    fn minimum_time_constant() {
        let (grid, dynamics, u, _, h) = setup();
        let field = ScalarField::constant(&grid, 0.0);
        let cost = RunningCost::minimum_time();
        let s = &decompose(&dynamics, &u, &grid.coords(5))[2];
        let lc = assemble(5, s, &field, &dynamics, &cost, h);
        assert_eq!(lc.family(), Family::MinimumTime);
        assert!((lc.eval(&[0.3, 0.2, 0.0]) - (1.0 - (-h).exp())).abs() < 1e-15);
    }

    #[test]
    fn eval_matches_expansion() {
        let mut lc = LocalCost::on(&ControlSet::ball(2, 1.0).unwrap());
        lc.quad = [1.5, 0.5, 0.0];
        lc.bilinear = 0.2;
        lc.linear = [-0.3, 0.7, 0.0];
        lc.l1 = [0.1, 0.4, 0.0];
        lc.constant = 2.0;
        let (u1, u2) = (0.3f64, -0.6f64);
        let expected = 0.75 * u1 * u1 + 0.2 * u1 * u2 + 0.25 * u2 * u2 + 0.1 * u1.abs() + 0.4 * u2.abs() - 0.3 * u1
            + 0.7 * u2
            + 2.0;
        assert!((lc.eval(&[u1, u2, 0.0]) - expected).abs() < 1e-14);
        assert_eq!(lc.eval(&[0.0; 3]), 2.0);
        assert_eq!(lc.family(), Family::QuadraticL1);
    }

    #[test]
    fn reflection_preserves_values() {
        let mut lc = LocalCost::on(&ControlSet::ball(2, 1.0).unwrap());
        lc.quad = [1.0, 2.0, 0.0];
        lc.bilinear = 0.3;
        lc.linear = [0.5, -0.25, 0.0];
        let signs = [-1.0, 1.0, 1.0];
        let r = lc.reflect(&signs);
        let v = [0.2, -0.4, 0.0];
        assert!((r.eval(&v) - lc.eval(&[-0.2, -0.4, 0.0])).abs() < 1e-15);
    }
}
