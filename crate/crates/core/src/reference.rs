//! Closed-form value function of the discounted eikonal problem with cost
//! `‖x‖²/2 + (γ/2)‖u‖²` and controls in the unit ball, plus error norms.
//!
//! The solution is radial: `v = A r²` up to `r̄`, where the unconstrained
//! optimal control reaches the unit sphere, and
//! `r²/(2λ) − r/λ² + γ/(2λ) + 1/λ³ + d e^{−λr}` beyond.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Point, ScalarField, VectorField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactEikonalSolution {
    pub lambda: f64,
    pub gamma: f64,
    pub a: f64,
    pub r_bar: f64,
    pub d: f64,
}

impl ExactEikonalSolution {
    pub fn new(lambda: f64, gamma: f64) -> Result<Self> {
        if !(lambda > 0.0 && gamma > 0.0 && lambda.is_finite() && gamma.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "exact solution needs lambda, gamma > 0, got {lambda}, {gamma}"
            )));
        }
        let s = (lambda * lambda + 4.0 / gamma).sqrt();
        let a = gamma / 4.0 * (s - lambda);
        let r_bar = 2.0 / (s - lambda);
        let l2 = lambda * lambda;
        let d = (lambda * r_bar).exp()
            * ((gamma / 2.0 + 1.0 / l2) * r_bar
                - r_bar * r_bar / (2.0 * lambda)
                - gamma / (2.0 * lambda)
                - 1.0 / (l2 * lambda));
        Ok(ExactEikonalSolution {
            lambda,
            gamma,
            a,
            r_bar,
            d,
        })
    }

    /// Inner branch `A r²`.
    pub fn inner(&self, r: f64) -> f64 {
        self.a * r * r
    }

    /// Outer branch, where the optimal control has unit norm.
    pub fn outer(&self, r: f64) -> f64 {
        let l = self.lambda;
        r * r / (2.0 * l) - r / (l * l) + self.gamma / (2.0 * l) + 1.0 / (l * l * l) + self.d * (-l * r).exp()
    }

    pub fn inner_slope(&self, r: f64) -> f64 {
        2.0 * self.a * r
    }

    pub fn outer_slope(&self, r: f64) -> f64 {
        let l = self.lambda;
        r / l - 1.0 / (l * l) - l * self.d * (-l * r).exp()
    }

    pub fn radial_value(&self, r: f64) -> f64 {
        if r <= self.r_bar {
            self.inner(r)
        } else {
            self.outer(r)
        }
    }

    pub fn radial_slope(&self, r: f64) -> f64 {
        if r <= self.r_bar {
            self.inner_slope(r)
        } else {
            self.outer_slope(r)
        }
    }

    pub fn exact_value(&self, x: &[f64]) -> f64 {
        self.radial_value(norm(x))
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let r = norm(x);
        if r == 0.0 {
            return vec![0.0; x.len()];
        }
        let s = self.radial_slope(r) / r;
        x.iter().map(|c| s * c).collect()
    }

    /// Optimal control `−∇v/γ` clipped to the unit ball.
    pub fn exact_control(&self, x: &[f64]) -> Vec<f64> {
        let g = self.gradient(x);
        let n = norm(&g);
        let scale = if n <= self.gamma { 1.0 / self.gamma } else { 1.0 / n };
        g.iter().map(|c| -scale * c).collect()
    }

    /// `λv + max_{‖u‖≤1} {−u·∇v − ‖x‖²/2 − (γ/2)‖u‖²}` at `x`.
    pub fn hjb_residual(&self, x: &[f64]) -> f64 {
        let p = norm(&self.gradient(x));
        let inner_max = if p <= self.gamma {
            p * p / (2.0 * self.gamma)
        } else {
            p - self.gamma / 2.0
        };
        let r = norm(x);
        self.lambda * self.exact_value(x) + inner_max - r * r / 2.0
    }

    pub fn value_field(&self, grid: &crate::grid::Grid) -> ScalarField {
        let d = grid.dim();
        ScalarField::from_fn(grid, |x| self.exact_value(&x[..d]))
    }

    pub fn control_field(&self, grid: &crate::grid::Grid) -> VectorField {
        let d = grid.dim();
        VectorField::from_fn(grid, d, |x| {
            let u = self.exact_control(&x[..d]);
            let mut p: Point = [0.0; 3];
            p[..d].copy_from_slice(&u);
            p
        })
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|c| c * c).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorNorms {
    /// `Σ |e_i| k^d`.
    pub l1: f64,
    /// Mean of the nodal errors.
    pub l1_mean: f64,
    pub linf: f64,
}

impl ErrorNorms {
    fn from_errors(errors: impl Iterator<Item = f64>, cell_volume: f64) -> Self {
        let (mut sum, mut max, mut n) = (0.0, 0.0f64, 0usize);
        for e in errors {
            sum += e;
            max = max.max(e);
            n += 1;
        }
        ErrorNorms {
            l1: sum * cell_volume,
            l1_mean: sum / n.max(1) as f64,
            linf: max,
        }
    }
}

pub fn error_norms(v: &ScalarField, exact: &ScalarField) -> Result<ErrorNorms> {
    if v.grid() != exact.grid() {
        return Err(Error::DimensionMismatch {
            expected: exact.values().len(),
            got: v.values().len(),
        });
    }
    let errors = v.values().iter().zip(exact.values()).map(|(a, b)| (a - b).abs());
    Ok(ErrorNorms::from_errors(errors, v.grid().cell_volume()))
}

/// Norms of the pointwise Euclidean distance between two control fields.
pub fn control_error_norms(u: &VectorField, exact: &VectorField) -> Result<ErrorNorms> {
    if u.grid() != exact.grid() || u.m() != exact.m() {
        return Err(Error::DimensionMismatch {
            expected: exact.m(),
            got: u.m(),
        });
    }
    let m = u.m();
    let errors = u
        .values()
        .iter()
        .zip(exact.values())
        .map(|(a, b)| (0..m).map(|j| (a[j] - b[j]) * (a[j] - b[j])).sum::<f64>().sqrt());
    Ok(ErrorNorms::from_errors(errors, u.grid().cell_volume()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn constants_for_default_parameters() {
        let s = ExactEikonalSolution::new(0.1, 2.0).unwrap();
        // A = 0.5 (sqrt(2.01) - 0.1)
        assert!((s.a - 0.658_872_343_937_891).abs() < 1e-10, "{}", s.a);
        assert!((s.exact_value(&[1.0, 0.0]) - s.a).abs() < 1e-15);
        assert!(s.r_bar > 2f64.sqrt());
        assert!((s.r_bar - 1.517_744_687_875_783).abs() < 1e-12, "{}", s.r_bar);
    }

    #[test]
    fn branches_match_at_switch() {
        for (l, g) in [(0.1, 2.0), (0.5, 0.3), (1.0, 10.0)] {
            let s = ExactEikonalSolution::new(l, g).unwrap();
            let r = s.r_bar;
            assert!((s.inner(r) - s.outer(r)).abs() <= 1e-12 * s.inner(r).max(1.0));
            assert!((s.inner_slope(r) - s.outer_slope(r)).abs() <= 1e-10 * g.max(1.0));
            assert!((s.inner(r) - g / 2.0 * r).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_vanishes_on_both_branches() {
        let s = ExactEikonalSolution::new(0.1, 2.0).unwrap();
        for r in [0.0, 0.3, 1.2, s.r_bar, 2.0, 3.5] {
            for x in [[r, 0.0], [0.6 * r, -0.8 * r]] {
                assert!(s.hjb_residual(&x).abs() < 1e-10, "r={r}: {}", s.hjb_residual(&x));
            }
        }
        assert!(s.hjb_residual(&[0.4, -0.2, 1.9]).abs() < 1e-10);
    }

    #[test]
    fn control_is_radial_and_feasible() {
        let s = ExactEikonalSolution::new(0.1, 2.0).unwrap();
        assert_eq!(s.exact_control(&[0.0, 0.0]), vec![0.0, 0.0]);
        let u = s.exact_control(&[0.5, 0.0]);
        assert!((u[0] + 2.0 * s.a * 0.5 / 2.0).abs() < 1e-14 && u[1] == 0.0);
        let u = s.exact_control(&[3.0, 4.0]);
        assert!((norm(&u) - 1.0).abs() < 1e-14 && u[0] < 0.0 && u[1] < 0.0);
    }

    #[test]
    fn error_norm_examples() {
        let g = Grid::cube(2, -1.0, 1.0, 0.5).unwrap();
        let a = ScalarField::constant(&g, 1.0);
        let e = error_norms(&a, &a).unwrap();
        assert_eq!((e.l1, e.linf), (0.0, 0.0));
        let b = ScalarField::constant(&g, 1.25);
        let e = error_norms(&b, &a).unwrap();
        assert!((e.l1 - 0.25 * 25.0 * 0.25).abs() < 1e-14);
        assert!((e.l1_mean - 0.25).abs() < 1e-14 && (e.linf - 0.25).abs() < 1e-14);
    }
}
