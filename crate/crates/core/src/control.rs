//! Admissible control sets, control-affine dynamics `f(x,u) = g(x) + B(x)u`
//! and the split of the control set into the sectors `U_I` whose arrival
//! points land in the simplex `Q_I` of the departure node.

use log::warn;
use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Point, Sector, MAX_DIM};

/// Slack used for all sector inequalities.
pub const SECTOR_SLACK: f64 = 1e-12;

/// Input matrix, rows indexed by state component and columns by control
/// component.
pub type InputMatrix = [[f64; MAX_DIM]; MAX_DIM];

/// Compact admissible control set.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlSet {
    /// `{u ∈ R^m : ‖u‖₂ ≤ radius}`
    Ball { m: usize, radius: f64 },
    /// `{u ∈ R^m : lower ≤ u ≤ upper}` with `lower ≤ 0 ≤ upper`.
    Box { m: usize, lower: Point, upper: Point },
}

impl ControlSet {
    pub fn ball(m: usize, radius: f64) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&m) {
            return Err(Error::InvalidProblem(format!("control dimension {m}")));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidProblem(format!("ball radius {radius} must be positive")));
        }
        Ok(ControlSet::Ball { m, radius })
    }

    pub fn box_set(lower: &[f64], upper: &[f64]) -> Result<Self> {
        let m = lower.len();
        if !(1..=MAX_DIM).contains(&m) || upper.len() != m {
            return Err(Error::InvalidProblem("box bounds must have equal length 1..=3".into()));
        }
        let mut lo = [0.0; MAX_DIM];
        let mut hi = [0.0; MAX_DIM];
        for j in 0..m {
            if !(lower[j] <= 0.0 && 0.0 <= upper[j]) || !lower[j].is_finite() || !upper[j].is_finite() {
                return Err(Error::InvalidProblem(format!(
                    "box component {j}: need lower <= 0 <= upper, got [{}, {}]",
                    lower[j], upper[j]
                )));
            }
            lo[j] = lower[j];
            hi[j] = upper[j];
        }
        Ok(ControlSet::Box {
            m,
            lower: lo,
            upper: hi,
        })
    }

    /// Symmetric box `[-w_j, w_j]`.
    pub fn symmetric_box(half_widths: &[f64]) -> Result<Self> {
        let lower: Vec<f64> = half_widths.iter().map(|w| -w).collect();
        ControlSet::box_set(&lower, half_widths)
    }

    pub fn m(&self) -> usize {
        match *self {
            ControlSet::Ball { m, .. } | ControlSet::Box { m, .. } => m,
        }
    }

    pub fn contains(&self, u: &Point, slack: f64) -> bool {
        match self {
            ControlSet::Ball { m, radius } => norm(&u[..*m]) <= radius + slack,
            ControlSet::Box { m, lower, upper } => {
                (0..*m).all(|j| u[j] >= lower[j] - slack && u[j] <= upper[j] + slack)
            }
        }
    }

    /// Euclidean projection onto the whole set.
    pub fn project(&self, p: &Point) -> Point {
        let mut u = *p;
        match self {
            ControlSet::Ball { m, radius } => {
                let n = norm(&p[..*m]);
                if n > *radius {
                    for c in u.iter_mut().take(*m) {
                        *c *= radius / n;
                    }
                }
            }
            ControlSet::Box { m, lower, upper } => {
                for j in 0..*m {
                    u[j] = u[j].clamp(lower[j], upper[j]);
                }
            }
        }
        u
    }
}

/// Named control-affine models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "model")]
pub enum DynamicsModel {
    /// `f(x,u) = u` in `d` dimensions.
    Eikonal { dim: usize },
    /// `f(x,u) = (x_2, x_3 + u_1, u_2)`.
    TripleIntegrator,
    /// `f(x,u) = (u_1 cos x_3, u_1 sin x_3, u_2)`.
    Car,
}

/// Scalar speed multiplier `1 + jump·χ{x_axis > threshold}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedStep {
    pub axis: usize,
    pub threshold: f64,
    pub jump: f64,
}

impl SpeedStep {
    pub fn at(&self, x: &Point) -> f64 {
        if x[self.axis] > self.threshold {
            1.0 + self.jump
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineControlDynamics {
    pub model: DynamicsModel,
    pub speed: Option<SpeedStep>,
}

impl AffineControlDynamics {
    pub fn new(model: DynamicsModel) -> Self {
        AffineControlDynamics { model, speed: None }
    }

    pub fn with_speed(model: DynamicsModel, speed: SpeedStep) -> Self {
        AffineControlDynamics {
            model,
            speed: Some(speed),
        }
    }

    pub fn state_dim(&self) -> usize {
        match self.model {
            DynamicsModel::Eikonal { dim } => dim,
            DynamicsModel::TripleIntegrator | DynamicsModel::Car => 3,
        }
    }

    pub fn control_dim(&self) -> usize {
        match self.model {
            DynamicsModel::Eikonal { dim } => dim,
            DynamicsModel::TripleIntegrator | DynamicsModel::Car => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let DynamicsModel::Eikonal { dim } = self.model {
            if !(1..=MAX_DIM).contains(&dim) {
                return Err(Error::InvalidProblem(format!("eikonal dimension {dim}")));
            }
        }
        if let Some(s) = self.speed {
            if s.axis >= self.state_dim() || !(1.0 + s.jump > 0.0) {
                return Err(Error::InvalidProblem("invalid speed multiplier".into()));
            }
        }
        Ok(())
    }

    fn speed_at(&self, x: &Point) -> f64 {
        self.speed.map_or(1.0, |s| s.at(x))
    }

    /// Drift `g(x)`.
    pub fn drift(&self, x: &Point) -> Point {
        match self.model {
            DynamicsModel::Eikonal { .. } | DynamicsModel::Car => [0.0; MAX_DIM],
            DynamicsModel::TripleIntegrator => [x[1], x[2], 0.0],
        }
    }

    /// Input matrix `B(x)`; every row has at most one nonzero entry.
    pub fn input(&self, x: &Point) -> InputMatrix {
        let c = self.speed_at(x);
        let mut b = [[0.0; MAX_DIM]; MAX_DIM];
        match self.model {
            DynamicsModel::Eikonal { dim } => {
                for (i, row) in b.iter_mut().enumerate().take(dim) {
                    row[i] = c;
                }
            }
            DynamicsModel::TripleIntegrator => {
                b[1][0] = c;
                b[2][1] = c;
            }
            DynamicsModel::Car => {
                b[0][0] = c * x[2].cos();
                b[1][0] = c * x[2].sin();
                b[2][1] = c;
            }
        }
        b
    }

    pub fn eval(&self, x: &Point, u: &Point) -> Point {
        let g = self.drift(x);
        let b = self.input(x);
        let mut f = [0.0; MAX_DIM];
        for i in 0..self.state_dim() {
            f[i] = g[i] + (0..self.control_dim()).map(|j| b[i][j] * u[j]).sum::<f64>();
        }
        f
    }
}

/// Half-space `normal·u + offset ≥ 0` in control space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfSpace {
    pub normal: Point,
    pub offset: f64,
}

/// Sign structure of one control component inside a sector of a ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Positive,
    Negative,
    Free,
    Zero,
}

/// The control subset `U_I` for one sector at one departure point.
///
/// The half-spaces `sign_i·(g_i + b_i·u) ≥ 0` are stored as given; since each
/// row of `B` touches at most one control component they also reduce to the
/// per-component interval `[lower, upper]` used for projections.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorSet {
    pub sector: Sector,
    pub m: usize,
    pub lower: Point,
    pub upper: Point,
    pub radius: Option<f64>,
    pub halfspaces: Vec<HalfSpace>,
    pub empty: bool,
    /// Set when an earlier sector (lexicographically) has the same feasible set.
    pub duplicate_of: Option<Sector>,
}

impl SectorSet {
    /// Whole control set with no sector restriction; used for standalone
    /// minimization problems.
    pub fn unrestricted(u: &ControlSet) -> Self {
        let m = u.m();
        let (lower, upper, radius) = match u {
            ControlSet::Ball { radius, .. } => ([f64::NEG_INFINITY; MAX_DIM], [f64::INFINITY; MAX_DIM], Some(*radius)),
            ControlSet::Box { lower, upper, .. } => (*lower, *upper, None),
        };
        let mut s = SectorSet {
            sector: Sector::default(),
            m,
            lower,
            upper,
            radius,
            halfspaces: Vec::new(),
            empty: false,
            duplicate_of: None,
        };
        s.zero_unused();
        s
    }

    /// Sign-pattern sector `{sign_j u_j ≥ 0}` of a control set, as produced by
    /// the eikonal decomposition.
    pub fn orthant(u: &ControlSet, sector: Sector) -> Self {
        let dynamics = AffineControlDynamics::new(DynamicsModel::Eikonal { dim: u.m() });
        sector_set(&dynamics, u, &[0.0; MAX_DIM], sector)
    }

    fn zero_unused(&mut self) {
        for j in self.m..MAX_DIM {
            self.lower[j] = 0.0;
            self.upper[j] = 0.0;
        }
    }

    pub fn is_active(&self) -> bool {
        !self.empty && self.duplicate_of.is_none()
    }

    pub fn is_ball(&self) -> bool {
        self.radius.is_some()
    }

    pub fn contains(&self, u: &Point, slack: f64) -> bool {
        if let Some(r) = self.radius {
            if norm(&u[..self.m]) > r + slack {
                return false;
            }
        }
        let in_box = (0..self.m).all(|j| u[j] >= self.lower[j] - slack && u[j] <= self.upper[j] + slack);
        let in_halfspaces = self.halfspaces.iter().all(|h| {
            let v = (0..self.m).map(|j| h.normal[j] * u[j]).sum::<f64>() + h.offset;
            v >= -slack
        });
        in_box && in_halfspaces
    }

    /// Sign structure of component `j` when the interval is a cone
    /// (`{0}`, `[0,∞)`, `(-∞,0]` or `R`, where the ball supplies the bound).
    pub fn orientation(&self, j: usize) -> Option<Orientation> {
        let (lo, hi) = (self.lower[j], self.upper[j]);
        let cone_bound = |b: f64| b == 0.0 || b.is_infinite();
        if !self.is_ball() || !cone_bound(lo) || !cone_bound(hi) {
            return None;
        }
        Some(match (lo == 0.0, hi == 0.0) {
            (true, true) => Orientation::Zero,
            (true, false) => Orientation::Positive,
            (false, true) => Orientation::Negative,
            (false, false) => Orientation::Free,
        })
    }

    /// True for ball sectors whose component intervals are all cones.
    pub fn is_cone(&self) -> bool {
        (0..self.m).all(|j| self.orientation(j).is_some())
    }

    /// Exact Euclidean projection onto the sector.
    pub fn project(&self, p: &Point) -> Point {
        let m = self.m;
        let clamp_scaled = |t: f64| {
            let mut u = [0.0; MAX_DIM];
            for j in 0..m {
                u[j] = (p[j] / t).clamp(self.lower[j], self.upper[j]);
            }
            u
        };
        let u = clamp_scaled(1.0);
        let Some(r) = self.radius else {
            return u;
        };
        let n = norm(&u[..m]);
        if n <= r {
            return u;
        }
        if self.is_cone() {
            // Clamping to cones commutes with positive scaling.
            let mut v = u;
            for c in v.iter_mut().take(m) {
                *c *= r / n;
            }
            return v;
        }
        // The projection is clamp(p / t) for the t ≥ 1 where the ball
        // constraint becomes active; the norm is nonincreasing in t.
        let mut hi = 2.0;
        while norm(&clamp_scaled(hi)[..m]) > r && hi < 1e300 {
            hi *= 2.0;
        }
        let mut lo = 1.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if norm(&clamp_scaled(mid)[..m]) > r {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        clamp_scaled(hi)
    }

    /// A representative interior-ish point used to start iterative solvers:
    /// the normalized centroid direction scaled to half the radius for ball
    /// sectors, the box midpoint otherwise.
    pub fn initial_point(&self) -> Point {
        let m = self.m;
        let mut u = [0.0; MAX_DIM];
        match self.radius {
            Some(r) => {
                for j in 0..m {
                    u[j] = match (self.lower[j].is_finite(), self.upper[j].is_finite()) {
                        (true, true) => 0.5 * (self.lower[j] + self.upper[j]),
                        (true, false) => self.lower[j].max(0.0) + if self.lower[j] >= 0.0 { 1.0 } else { 0.0 },
                        (false, true) => self.upper[j].min(0.0) - if self.upper[j] <= 0.0 { 1.0 } else { 0.0 },
                        (false, false) => 0.0,
                    };
                }
                let n = norm(&u[..m]);
                if n > 0.0 {
                    for c in u.iter_mut().take(m) {
                        *c *= 0.5 * r / n;
                    }
                }
            }
            None => {
                for j in 0..m {
                    u[j] = 0.5 * (self.lower[j] + self.upper[j]);
                }
            }
        }
        self.project(&u)
    }

    fn same_set(&self, other: &SectorSet) -> bool {
        let close = |a: f64, b: f64| a == b || (a - b).abs() <= SECTOR_SLACK;
        (0..self.m).all(|j| close(self.lower[j], other.lower[j]) && close(self.upper[j], other.upper[j]))
    }
}

fn sector_set(dynamics: &AffineControlDynamics, u: &ControlSet, x: &Point, sector: Sector) -> SectorSet {
    let mut set = SectorSet::unrestricted(u);
    set.sector = sector;
    let d = dynamics.state_dim();
    let m = set.m;
    let g = dynamics.drift(x);
    let b = dynamics.input(x);
    let scale = b
        .iter()
        .take(d)
        .flat_map(|r| r.iter().take(m))
        .fold(0.0f64, |a, v| a.max(v.abs()))
        .max(1.0);
    for i in 0..d {
        let s = sector.sign(i);
        let mut normal = [0.0; MAX_DIM];
        for j in 0..m {
            normal[j] = s * b[i][j];
        }
        let offset = s * g[i];
        set.halfspaces.push(HalfSpace { normal, offset });

        let support: Vec<usize> = (0..m).filter(|&j| b[i][j].abs() > 1e-14 * scale).collect();
        match support.as_slice() {
            [] => {
                if offset < -SECTOR_SLACK {
                    set.empty = true;
                }
            }
            [j] => {
                // normal_j·u_j + offset ≥ 0
                let bound = -offset / normal[*j];
                if normal[*j] > 0.0 {
                    set.lower[*j] = set.lower[*j].max(bound);
                } else {
                    set.upper[*j] = set.upper[*j].min(bound);
                }
            }
            _ => unreachable!("input rows touch at most one control component"),
        }
    }
    for j in 0..m {
        if set.lower[j] > set.upper[j] {
            if set.lower[j] - set.upper[j] <= SECTOR_SLACK {
                let mid = 0.5 * (set.lower[j] + set.upper[j]);
                set.lower[j] = mid;
                set.upper[j] = mid;
            } else {
                set.empty = true;
            }
        }
        // Snap bounds that are zero up to rounding so cone detection works.
        if set.lower[j].abs() <= SECTOR_SLACK {
            set.lower[j] = 0.0;
        }
        if set.upper[j].abs() <= SECTOR_SLACK {
            set.upper[j] = 0.0;
        }
    }
    if let (Some(r), false) = (set.radius, set.empty) {
        // Nonempty iff the box point closest to the origin lies in the ball.
        let closest: Vec<f64> = (0..m).map(|j| 0.0f64.clamp(set.lower[j], set.upper[j])).collect();
        if norm(&closest) > r + SECTOR_SLACK {
            set.empty = true;
        }
    }
    set
}

/// Splits `u` into the `2^d` sectors at departure point `x`, in lexicographic
/// order. Infeasible sectors are flagged `empty`; a sector whose feasible set
/// equals that of an earlier one is marked as its duplicate.
pub fn decompose(dynamics: &AffineControlDynamics, u: &ControlSet, x: &Point) -> Vec<SectorSet> {
    let mut sets: Vec<SectorSet> = Sector::all(dynamics.state_dim())
        .into_iter()
        .map(|s| sector_set(dynamics, u, x, s))
        .collect();
    for n in 1..sets.len() {
        if sets[n].empty {
            continue;
        }
        if let Some(first) = sets[..n].iter().find(|e| e.is_active() && e.same_set(&sets[n])) {
            sets[n].duplicate_of = Some(first.sector);
        }
    }
    sets
}

/// Projection onto the nonnegative part of the unit ball:
/// `max(0,p) / max(1, ‖max(0,p)‖₂)`.
pub fn project_ball(p: &[f64]) -> Vec<f64> {
    let plus: Vec<f64> = p.iter().map(|v| v.max(0.0)).collect();
    let n = norm(&plus).max(1.0);
    plus.into_iter().map(|v| v / n).collect()
}

/// Projection onto the sector `sector` of the ball of radius `radius`, by sign
/// flips to the nonnegative orthant.
pub fn project_ball_sector(p: &[f64], sector: Sector, radius: f64) -> Vec<f64> {
    let flipped: Vec<f64> = p.iter().enumerate().map(|(j, v)| sector.sign(j) * v / radius).collect();
    project_ball(&flipped)
        .into_iter()
        .enumerate()
        .map(|(j, v)| sector.sign(j) * v * radius)
        .collect()
}

/// Component-wise clamp into `[max(0,lower), upper]` for axes in the sector
/// and `[lower, min(0,upper)]` otherwise.
pub fn project_box(p: &[f64], lower: &[f64], upper: &[f64], sector: Sector) -> Vec<f64> {
    p.iter()
        .enumerate()
        .map(|(j, v)| {
            if sector.contains(j) {
                v.clamp(lower[j].max(0.0), upper[j])
            } else {
                v.clamp(lower[j], upper[j].min(0.0))
            }
        })
        .collect()
}

/// Largest admissible time step: `(k/√d) / sup ‖g(x) + B(x)u‖₂`, the supremum
/// taken over grid nodes (ball: `‖g‖ + ρ‖B‖₂`, box: vertex enumeration).
/// Returns `+∞` for vanishing dynamics.
pub fn max_timestep(dynamics: &AffineControlDynamics, u: &ControlSet, grid: &Grid) -> f64 {
    let s = dynamics_sup(dynamics, u, grid);
    if s == 0.0 {
        warn!("dynamics vanish on the grid; time step is unbounded");
        return f64::INFINITY;
    }
    grid.k() / (grid.dim() as f64).sqrt() / s
}

/// Upper bound on `‖g(x) + B(x)u‖₂` over grid nodes and admissible controls.
pub fn dynamics_sup(dynamics: &AffineControlDynamics, u: &ControlSet, grid: &Grid) -> f64 {
    let d = dynamics.state_dim();
    let m = u.m();
    let mut sup = 0.0f64;
    for node in grid.nodes() {
        let x = grid.coords(node);
        let g = dynamics.drift(&x);
        let b = dynamics.input(&x);
        let value = match u {
            ControlSet::Ball { radius, .. } => norm(&g[..d]) + radius * spectral_norm(&b, d, m),
            ControlSet::Box { lower, upper, .. } => (0..(1usize << m))
                .map(|corner| {
                    let mut f = [0.0; MAX_DIM];
                    for i in 0..d {
                        f[i] = g[i];
                        for j in 0..m {
                            let v = if corner & (1 << j) != 0 { upper[j] } else { lower[j] };
                            f[i] += b[i][j] * v;
                        }
                    }
                    norm(&f[..d])
                })
                .fold(0.0, f64::max),
        };
        sup = sup.max(value);
    }
    sup
}

fn spectral_norm(b: &InputMatrix, d: usize, m: usize) -> f64 {
    let mut bt_b = Matrix3::<f64>::zeros();
    for r in 0..m {
        for c in 0..m {
            bt_b[(r, c)] = (0..d).map(|i| b[i][r] * b[i][c]).sum();
        }
    }
    bt_b.symmetric_eigenvalues()
        .iter()
        .fold(0.0f64, |a, &v| a.max(v))
        .sqrt()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
