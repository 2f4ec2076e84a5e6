//! Regular box grids, nodal fields and the piecewise-linear interpolants used
//! by the semi-Lagrangian scheme.
//!
//! Around every node the interpolation patch is made of `2^d` simplices, one
//! per sign pattern of the displacement. The simplex for [`Sector`] `I` has
//! vertices `x`, `x + k e_i` for `i ∈ I` and `x - k e_i` for `i ∉ I`. On it
//! the interpolant is affine, so composing it with an arrival point that is
//! affine in the control yields a polynomial local problem.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported state (and control) dimension.
pub const MAX_DIM: usize = 3;

/// A point in state or control space. Only the first `dim` entries are used;
/// the rest stay zero.
pub type Point = [f64; MAX_DIM];

/// Index set `I ⊆ {1..d}` selecting one simplex of a node patch, stored as a
/// bit mask (bit `i` set means axis `i` is displaced in the positive
/// direction).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Sector(u8);

impl Sector {
    pub const fn from_bits(bits: u8) -> Self {
        Sector(bits)
    }

    pub fn from_indices(indices: &[usize]) -> Self {
        Sector(indices.iter().fold(0u8, |acc, &i| acc | (1 << i)))
    }

    pub const fn bits(self) -> u8 {
        self.0
    }

    /// All `2^dim` sectors in lexicographic order of their index lists.
    pub fn all(dim: usize) -> Vec<Sector> {
        let mut sectors: Vec<Sector> = (0..(1u8 << dim)).map(Sector).collect();
        sectors.sort();
        sectors
    }

    pub fn contains(self, axis: usize) -> bool {
        self.0 & (1 << axis) != 0
    }

    /// `+1` for axes in the set, `-1` otherwise.
    pub fn sign(self, axis: usize) -> f64 {
        if self.contains(axis) {
            1.0
        } else {
            -1.0
        }
    }

    pub fn indices(self) -> impl Iterator<Item = usize> {
        (0..8).filter(move |&i| self.0 & (1 << i) != 0)
    }
}

impl Ord for Sector {
    fn cmp(&self, other: &Self) -> Ordering {
        self.indices().cmp(other.indices())
    }
}

impl PartialOrd for Sector {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (n, i) in self.indices().enumerate() {
            if n > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sector{self}")
    }
}

/// Uniform grid on the box `[lo, hi]` with spacing `k` in every direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    lo: Point,
    hi: Point,
    k: f64,
    counts: [usize; MAX_DIM],
}

impl Grid {
    pub fn new(lo: &[f64], hi: &[f64], k: f64) -> Result<Self> {
        let dim = lo.len();
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 2..=3")));
        }
        if hi.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: hi.len(),
            });
        }
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidGrid(format!("mesh size {k} must be positive")));
        }
        let mut g = Grid {
            dim,
            lo: [0.0; MAX_DIM],
            hi: [0.0; MAX_DIM],
            k,
            counts: [1; MAX_DIM],
        };
        for i in 0..dim {
            let len = hi[i] - lo[i];
            if !(len.is_finite() && len > 0.0) {
                return Err(Error::InvalidGrid(format!("empty extent on axis {i}")));
            }
            let cells = (len / k).round();
            if (cells * k - len).abs() > 1e-12 * len.max(1.0) {
                return Err(Error::InvalidGrid(format!(
                    "extent {len} on axis {i} is not a multiple of k = {k}"
                )));
            }
            g.lo[i] = lo[i];
            g.hi[i] = hi[i];
            g.counts[i] = cells as usize + 1;
        }
        Ok(g)
    }

    /// Cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64, k: f64) -> Result<Self> {
        Grid::new(&vec![lo; dim], &vec![hi; dim], k)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo[..self.dim]
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi[..self.dim]
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts[..self.dim]
    }

    pub fn len(&self) -> usize {
        self.counts().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Volume element `k^d` used by Riemann-sum norms.
    pub fn cell_volume(&self) -> f64 {
        self.k.powi(self.dim as i32)
    }

    pub fn measure(&self) -> f64 {
        (0..self.dim).map(|i| self.hi[i] - self.lo[i]).product()
    }

    /// Row-major linear index, first axis slowest.
    pub fn linear(&self, idx: &[usize; MAX_DIM]) -> usize {
        let mut n = 0;
        for i in 0..self.dim {
            n = n * self.counts[i] + idx[i];
        }
        n
    }

    pub fn multi(&self, mut node: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        for i in (0..self.dim).rev() {
            idx[i] = node % self.counts[i];
            node /= self.counts[i];
        }
        idx
    }

    pub fn coords_of(&self, idx: &[usize; MAX_DIM]) -> Point {
        let mut x = [0.0; MAX_DIM];
        for i in 0..self.dim {
            x[i] = self.lo[i] + self.k * idx[i] as f64;
        }
        x
    }

    pub fn coords(&self, node: usize) -> Point {
        self.coords_of(&self.multi(node))
    }

    /// Component-wise projection into the domain.
    pub fn clamp(&self, x: &Point) -> Point {
        let mut y = *x;
        for i in 0..self.dim {
            y[i] = y[i].clamp(self.lo[i], self.hi[i]);
        }
        y
    }

    pub fn contains(&self, x: &Point) -> bool {
        (0..self.dim).all(|i| x[i] >= self.lo[i] && x[i] <= self.hi[i])
    }

    /// Neighbour of `node` one step along `axis` in direction `sign`, if it
    /// exists.
    pub fn neighbor(&self, node: usize, axis: usize, sign: f64) -> Option<usize> {
        let mut idx = self.multi(node);
        if sign > 0.0 {
            if idx[axis] + 1 >= self.counts[axis] {
                return None;
            }
            idx[axis] += 1;
        } else {
            if idx[axis] == 0 {
                return None;
            }
            idx[axis] -= 1;
        }
        Some(self.linear(&idx))
    }

    /// Lower corner of the cell containing `x` (after clamping). Points that
    /// sit on a node within `1e-9·k` are snapped to it.
    pub fn anchor(&self, x: &Point) -> usize {
        let x = self.clamp(x);
        let mut idx = [0; MAX_DIM];
        for i in 0..self.dim {
            let t = (x[i] - self.lo[i]) / self.k;
            let r = t.round();
            let f = if (t - r).abs() < 1e-9 { r } else { t.floor() };
            idx[i] = (f.max(0.0) as usize).min(self.counts[i] - 1);
        }
        self.linear(&idx)
    }

    /// Node whose coordinates coincide with `x` up to `1e-9·k`.
    pub fn node_at(&self, x: &Point) -> Option<usize> {
        let node = self.anchor(x);
        let y = self.coords(node);
        let close = (0..self.dim).all(|i| (x[i] - y[i]).abs() <= 1e-9 * self.k);
        close.then_some(node)
    }

    pub fn nodes(&self) -> std::ops::Range<usize> {
        0..self.len()
    }
}

/// One real value per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(ScalarField { grid, values })
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        ScalarField {
            values: vec![value; grid.len()],
            grid: grid.clone(),
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&Point) -> f64) -> Self {
        let values = grid.nodes().map(|n| f(&grid.coords(n))).collect();
        ScalarField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<usize> for ScalarField {
    type Output = f64;

    fn index(&self, node: usize) -> &f64 {
        &self.values[node]
    }
}

/// One control vector of length `m` per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid,
    m: usize,
    values: Vec<Point>,
}

impl VectorField {
    pub fn new(grid: Grid, m: usize, values: Vec<Point>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(VectorField { grid, m, values })
    }

    pub fn from_fn(grid: &Grid, m: usize, f: impl Fn(&Point) -> Point) -> Self {
        let values = grid.nodes().map(|n| f(&grid.coords(n))).collect();
        VectorField {
            grid: grid.clone(),
            m,
            values,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[Point] {
        &self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|u| u[..self.m].iter().all(|c| c.is_finite()))
    }
}

impl std::ops::Index<usize> for VectorField {
    type Output = Point;

    fn index(&self, node: usize) -> &Point {
        &self.values[node]
    }
}

/// Affine interpolant of a field on the simplex of one sector around an
/// anchor node: `A(x) = value + Σ slope_i (x_i - anchor_i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorInterpolant {
    pub sector: Sector,
    pub dim: usize,
    pub anchor: Point,
    pub value: f64,
    pub slopes: Point,
}

impl SectorInterpolant {
    pub fn eval(&self, x: &Point) -> f64 {
        let mut v = self.value;
        for i in 0..self.dim {
            v += self.slopes[i] * (x[i] - self.anchor[i]);
        }
        v
    }

    /// Coefficients `c` of the global affine form `c·x + e`.
    pub fn gradient(&self) -> &[f64] {
        &self.slopes[..self.dim]
    }

    /// Offset `e` of the global affine form `c·x + e`.
    pub fn offset(&self) -> f64 {
        self.value - (0..self.dim).map(|i| self.slopes[i] * self.anchor[i]).sum::<f64>()
    }
}

/// Interpolant of `field` on the simplex of `sector` around `node`.
///
/// A vertex missing at the domain boundary takes the value of `node` itself,
/// which is the same as clamping the arrival point into the domain.
pub fn sector_interpolant(field: &ScalarField, node: usize, sector: Sector) -> SectorInterpolant {
    let grid = field.grid();
    let value = field[node];
    let mut slopes = [0.0; MAX_DIM];
    for (axis, slope) in slopes.iter_mut().enumerate().take(grid.dim()) {
        let sign = sector.sign(axis);
        if let Some(nb) = grid.neighbor(node, axis, sign) {
            *slope = sign * (field[nb] - value) / grid.k();
        }
    }
    SectorInterpolant {
        sector,
        dim: grid.dim(),
        anchor: grid.coords(node),
        value,
        slopes,
    }
}

/// Globally continuous piecewise-linear interpolant of `field` at `x`.
///
/// Points outside the domain are clamped first. Each cell is split into `d!`
/// simplices along the diagonal that joins the corner `(lo_1, hi_2, …)` to
/// `(hi_1, lo_2, …)`; in two dimensions these are exactly the lower-left
/// simplex of the lower-left node patch and the upper-right simplex of the
/// upper-right node patch.
pub fn eval_arrival(field: &ScalarField, x: &Point) -> f64 {
    let grid = field.grid();
    let d = grid.dim();
    let x = grid.clamp(x);
    let mut base = [0usize; MAX_DIM];
    let mut s = [0.0; MAX_DIM];
    for i in 0..d {
        let cells = grid.counts()[i] - 1;
        let t = (x[i] - grid.lo()[i]) / grid.k();
        let b = (t.floor().max(0.0) as usize).min(cells.saturating_sub(1));
        base[i] = b;
        let frac = (t - b as f64).clamp(0.0, 1.0);
        s[i] = if i == 0 { frac } else { 1.0 - frac };
    }
    let mut order = [0usize, 1, 2];
    order[..d].sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap_or(Ordering::Equal));

    // Walk the Kuhn path in reflected coordinates and map back to corners.
    let mut corner = [0u8; MAX_DIM];
    let corner_node = |c: &[u8; MAX_DIM]| {
        let mut idx = base;
        for i in 0..d {
            let bit = if i == 0 { c[i] } else { 1 - c[i] };
            idx[i] += bit as usize;
        }
        grid.linear(&idx)
    };
    let mut value = (1.0 - s[order[0]]) * field[corner_node(&corner)];
    for j in 0..d {
        corner[order[j]] = 1;
        let next = if j + 1 < d { s[order[j + 1]] } else { 0.0 };
        let w = s[order[j]] - next;
        value += w * field[corner_node(&corner)];
    }
    value
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2() -> Grid {
        Grid::cube(2, -1.0, 1.0, 0.05).unwrap()
    }

    #[test]
    fn counts_and_coordinates() {
        let g = grid2();
        assert_eq!(g.counts(), &[41, 41]);
        assert_eq!(g.len(), 1681);
        let n = g.linear(&[40, 20, 0]);
        let x = g.coords(n);
        assert_eq!(x[0], -1.0 + 0.05 * 40.0);
        assert_eq!(x[1], -1.0 + 0.05 * 20.0);
        assert_eq!(g.multi(n), [40, 20, 0]);
    }

    #[test]
    fn rejects_incommensurate_extent() {
        assert!(Grid::cube(3, 0.0, 2.0 * std::f64::consts::PI, 0.2).is_err());
        assert!(Grid::cube(2, 0.0, 1.0, -0.1).is_err());
        assert!(Grid::cube(4, 0.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn sector_order_is_lexicographic() {
        let all = Sector::all(3);
        let names: Vec<String> = all.iter().map(|s| s.to_string()).collect();
        assert_eq!(names, ["{}", "{1}", "{1,2}", "{1,2,3}", "{1,3}", "{2}", "{2,3}", "{3}"]);
    }

    #[test]
    fn constant_field_has_zero_slopes() {
        let g = grid2();
        let f = ScalarField::constant(&g, 5.0);
        for s in Sector::all(2) {
            let it = sector_interpolant(&f, 0, s);
            assert_eq!(it.gradient(), &[0.0, 0.0]);
            assert_eq!(it.offset(), 5.0);
        }
    }

    #[test]
    fn linear_field_reproduced() {
        let g = grid2();
        let f = ScalarField::from_fn(&g, |x| x[0]);
        let node = g.linear(&[10, 12, 0]);
        let it = sector_interpolant(&f, node, Sector::from_indices(&[0, 1]));
        assert!((it.gradient()[0] - 1.0).abs() < 1e-12);
        assert!(it.gradient()[1].abs() < 1e-12);
        assert!(it.offset().abs() < 1e-12);
    }

    #[test]
    fn boundary_uses_zero_slope_outward() {
        let g = grid2();
        let f = ScalarField::from_fn(&g, |x| x[0] + 2.0 * x[1]);
        let corner = g.linear(&[40, 40, 0]);
        let it = sector_interpolant(&f, corner, Sector::from_indices(&[0, 1]));
        assert_eq!(it.gradient(), &[0.0, 0.0]);
        let it = sector_interpolant(&f, corner, Sector::from_indices(&[]));
        assert!((it.gradient()[0] - 1.0).abs() < 1e-12);
        assert!((it.gradient()[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn eval_at_nodes_and_midpoints() {
        let g = Grid::cube(2, 0.0, 1.0, 0.5).unwrap();
        let mut f = ScalarField::constant(&g, 0.0);
        f.values_mut()[g.linear(&[0, 0, 0])] = 1.0;
        f.values_mut()[g.linear(&[1, 0, 0])] = 3.0;
        assert_eq!(eval_arrival(&f, &[0.0, 0.0, 0.0]), 1.0);
        assert_eq!(eval_arrival(&f, &[0.5, 0.0, 0.0]), 3.0);
        assert!((eval_arrival(&f, &[0.25, 0.0, 0.0]) - 2.0).abs() < 1e-14);
        // Clamped from outside.
        assert_eq!(eval_arrival(&f, &[-3.0, -3.0, 0.0]), 1.0);
    }

    #[test]
    fn anchor_snaps_to_nodes() {
        let g = grid2();
        for n in [0, 17, 900, g.len() - 1] {
            assert_eq!(g.anchor(&g.coords(n)), n);
            assert_eq!(g.node_at(&g.coords(n)), Some(n));
        }
        assert_eq!(g.node_at(&[0.01, 0.0, 0.0]), None);
    }
}
