//! Exact minimization of two-dimensional costs whose Hessian is not
//! positive definite, over ball sectors (cones) and boxes.
//!
//! Such a cost has no strict interior minimizer: along some direction it is
//! concave or flat, so a minimizer can be moved to the boundary. Inside one
//! quadrant `|u_j| = s_j u_j`, so the ℓ1 term only shifts the linear
//! coefficients. Per quadrant the boundary consists of
//!
//! - axis segments and box edges, where the cost is a one-dimensional
//!   quadratic minimized in closed form,
//! - for balls, the arc `u = ρ(cos φ, sin φ)` with
//!   `F̃(φ) = ρ(d cos φ + e sin φ) + ρ²(a/2 cos² φ + c/2 sin² φ + b sin φ cos φ)`,
//!   whose critical points are bracketed on a fixed mesh and refined by
//!   safeguarded Newton steps.
//!
//! The candidates are compared on the full cost.

use std::f64::consts::FRAC_PI_2;

use super::{oracle, MinimizerConfig, MinimizerResult};
use crate::control::Orientation;
use crate::grid::{Point, MAX_DIM};
use crate::local::LocalCost;

/// Brackets per quarter arc when looking for critical points.
const SAMPLES: usize = 16;

/// Comparison points used where the routine does not apply.
const FALLBACK_POINTS: usize = 10_000;

struct Arc {
    d: f64,
    e: f64,
    a: f64,
    c: f64,
    b: f64,
    rho: f64,
}

impl Arc {
    fn slope(&self, t: f64) -> f64 {
        let (s, c) = t.sin_cos();
        let r2 = self.rho * self.rho;
        self.rho * (-self.d * s + self.e * c)
            + r2 * (0.5 * (self.c - self.a) * (2.0 * t).sin() + self.b * (2.0 * t).cos())
    }

    fn curvature(&self, t: f64) -> f64 {
        let (s, c) = t.sin_cos();
        let r2 = self.rho * self.rho;
        self.rho * (-self.d * c - self.e * s)
            + r2 * ((self.c - self.a) * (2.0 * t).cos() - 2.0 * self.b * (2.0 * t).sin())
    }

    /// Root of the slope in `[lo, hi]` (sign change assumed) by Newton steps
    /// kept inside the shrinking bracket.
    fn critical_point(&self, mut lo: f64, mut hi: f64, iterations: &mut usize) -> f64 {
        let f_lo = self.slope(lo);
        let scale = self.rho * (self.d.abs() + self.e.abs() + self.rho * (self.a.abs() + self.b.abs() + self.c.abs()));
        let tol = 1e-14 * scale;
        let mut t = 0.5 * (lo + hi);
        for _ in 0..100 {
            *iterations += 1;
            let f = self.slope(t);
            if f.abs() <= tol || hi - lo < 1e-15 {
                return t;
            }
            if (f > 0.0) == (f_lo > 0.0) {
                lo = t;
            } else {
                hi = t;
            }
            let c = self.curvature(t);
            let newton = if c != 0.0 { t - f / c } else { f64::NAN };
            t = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        t
    }
}

/// Whether the routine is exact for `lc`.
pub fn applies(lc: &LocalCost) -> bool {
    let s = &lc.sector;
    let shape = if s.is_ball() {
        s.is_cone()
    } else {
        s.lower[..2].iter().chain(&s.upper[..2]).all(|v| v.is_finite())
    };
    let q = &lc.quad;
    let positive_definite = q[0] > 0.0 && q[0] * q[1] - lc.bilinear * lc.bilinear > 0.0;
    lc.m == 2 && shape && !positive_definite
}

struct Search<'a> {
    lc: &'a LocalCost,
    best: Point,
    best_value: f64,
    iterations: usize,
}

impl Search<'_> {
    fn consider(&mut self, u: Point) {
        let v = self.lc.eval(&u);
        if v < self.best_value {
            self.best_value = v;
            self.best = u;
        }
    }

    /// Minimizes over the segment `base + t·e_axis`, `t ∈ [t0, t1]`, on which
    /// the coordinate `axis` has sign `sign`.
    fn segment(&mut self, base: Point, axis: usize, t0: f64, t1: f64, sign: f64) {
        let lc = self.lc;
        let other = 1 - axis;
        let half = 0.5 * lc.quad[axis];
        let slope = lc.linear[axis] + lc.l1[axis] * sign + lc.bilinear * base[other];
        let at = |t: f64| {
            let mut u = base;
            u[axis] = t;
            u
        };
        self.consider(at(t0));
        self.consider(at(t1));
        if half > 0.0 {
            let t = (-slope / (2.0 * half)).clamp(t0, t1);
            self.consider(at(t));
        }
        self.iterations += 1;
    }

    fn quarter_arc(&mut self, rho: f64, quadrant: usize, s0: f64, s1: f64) {
        let lc = self.lc;
        let arc = Arc {
            d: lc.linear[0] + lc.l1[0] * s0,
            e: lc.linear[1] + lc.l1[1] * s1,
            a: lc.quad[0],
            c: lc.quad[1],
            b: lc.bilinear,
            rho,
        };
        let a0 = quadrant as f64 * FRAC_PI_2;
        let step = FRAC_PI_2 / SAMPLES as f64;
        let mut prev = arc.slope(a0);
        for i in 1..=SAMPLES {
            let t = a0 + step * i as f64;
            let cur = arc.slope(t);
            // A minimum of F̃ is where the slope changes from - to +.
            if prev < 0.0 && cur >= 0.0 {
                let root = arc.critical_point(t - step, t, &mut self.iterations);
                self.consider([rho * root.cos(), rho * root.sin(), 0.0]);
            }
            prev = cur;
        }
    }
}

fn signs(o: Orientation) -> &'static [f64] {
    match o {
        Orientation::Positive => &[1.0],
        Orientation::Negative => &[-1.0],
        Orientation::Free => &[1.0, -1.0],
        Orientation::Zero => &[0.0],
    }
}

/// Splits `[lo, hi]` at zero, pairing each piece with its sign.
fn pieces(lo: f64, hi: f64) -> Vec<(f64, f64, f64)> {
    if lo < 0.0 && hi > 0.0 {
        vec![(lo, 0.0, -1.0), (0.0, hi, 1.0)]
    } else if hi <= 0.0 {
        vec![(lo, hi, -1.0)]
    } else {
        vec![(lo, hi, 1.0)]
    }
}

pub fn sphere_newton(lc: &LocalCost, _cfg: &MinimizerConfig) -> MinimizerResult {
    if !applies(lc) {
        return oracle(lc, FALLBACK_POINTS).flagged();
    }
    let s = &lc.sector;
    let mut search = Search {
        lc,
        best: [0.0; MAX_DIM],
        best_value: f64::INFINITY,
        iterations: 0,
    };
    if let Some(rho) = s.radius {
        search.consider([0.0; MAX_DIM]);
        let o = [s.orientation(0).unwrap(), s.orientation(1).unwrap()];
        for &s0 in signs(o[0]) {
            for &s1 in signs(o[1]) {
                if s0 != 0.0 {
                    search.segment([0.0; MAX_DIM], 0, 0.0_f64.min(s0 * rho), 0.0_f64.max(s0 * rho), s0);
                }
                if s1 != 0.0 {
                    search.segment([0.0; MAX_DIM], 1, 0.0_f64.min(s1 * rho), 0.0_f64.max(s1 * rho), s1);
                }
                if s0 != 0.0 && s1 != 0.0 {
                    let quadrant = match (s0 > 0.0, s1 > 0.0) {
                        (true, true) => 0,
                        (false, true) => 1,
                        (false, false) => 2,
                        (true, false) => 3,
                    };
                    search.quarter_arc(rho, quadrant, s0, s1);
                }
            }
        }
    } else {
        for &(lo0, hi0, s0) in &pieces(s.lower[0], s.upper[0]) {
            for &(lo1, hi1, s1) in &pieces(s.lower[1], s.upper[1]) {
                search.segment([0.0, lo1, 0.0], 0, lo0, hi0, s0);
                search.segment([0.0, hi1, 0.0], 0, lo0, hi0, s0);
                search.segment([lo0, 0.0, 0.0], 1, lo1, hi1, s1);
                search.segment([hi0, 0.0, 0.0], 1, lo1, hi1, s1);
            }
        }
    }
    let mut r = MinimizerResult::new(lc, search.best, search.iterations.max(1), true);
    r.value = search.best_value;
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{ControlSet, SectorSet};
    use crate::grid::Sector;

    fn mt(b: f64, d: f64, e: f64, sector: &[usize]) -> LocalCost {
        let u = ControlSet::ball(2, 1.0).unwrap();
        let mut lc = LocalCost::on(&u);
        lc.sector = SectorSet::orthant(&u, Sector::from_indices(sector));
        lc.bilinear = b;
        lc.linear = [d, e, 0.0];
        lc.constant = 0.5;
        lc
    }

    #[test]
    fn linear_objective_hits_endpoint() {
        let lc = mt(0.0, -1.0, 0.0, &[0, 1]);
        let r = sphere_newton(&lc, &MinimizerConfig::default());
        assert!((r.u[0] - 1.0).abs() < 1e-12 && r.u[1].abs() < 1e-12, "{:?}", r.u);
        assert!((r.value + 0.5).abs() < 1e-12);
    }

    #[test]
    fn never_returns_saddle() {
        let lc = mt(1.0, 0.3, -0.2, &[0, 1]);
        let r = sphere_newton(&lc, &MinimizerConfig::default());
        let saddle = [0.2, -0.3];
        assert!((r.u[0] - saddle[0]).abs() > 1e-3 || (r.u[1] - saddle[1]).abs() > 1e-3);
    }

    #[test]
    fn matches_angular_scan() {
        for (b, d, e, s) in [
            (0.7, -0.2, 0.4, vec![]),
            (-1.3, 0.5, -0.1, vec![0]),
            (2.0, 0.1, 0.1, vec![0, 1]),
        ] {
            let lc = mt(b, d, e, &s);
            let r = sphere_newton(&lc, &MinimizerConfig::default());
            let mut scan = lc.eval(&[0.0; 3]);
            let n = 1_000_000;
            for i in 0..=n {
                let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                let u = [t.cos(), t.sin(), 0.0];
                if lc.sector.contains(&u, 1e-12) {
                    scan = scan.min(lc.eval(&u));
                }
            }
            assert!(r.value <= scan + 1e-8, "{} vs {}", r.value, scan);
            assert!(lc.sector.contains(&r.u, 1e-12));
        }
    }

    #[test]
    fn box_and_l1_match_grid_scan() {
        let u = ControlSet::symmetric_box(&[0.7, 0.4]).unwrap();
        for (sector, b, l1) in [(vec![], 1.5, 0.0), (vec![0, 1], -1.1, 0.3), (vec![1], 0.8, 0.2)] {
            let mut lc = LocalCost::on(&u);
            lc.sector = SectorSet::orthant(&u, Sector::from_indices(&sector));
            lc.bilinear = b;
            lc.quad = [0.4, 0.0, 0.0];
            lc.linear = [0.2, -0.3, 0.0];
            lc.l1 = [l1, l1, 0.0];
            assert!(applies(&lc));
            let r = sphere_newton(&lc, &MinimizerConfig::default());
            let n = 1000;
            let mut scan = f64::INFINITY;
            for i in 0..=n {
                for j in 0..=n {
                    let p = [-0.7 + 1.4 * i as f64 / n as f64, -0.4 + 0.8 * j as f64 / n as f64, 0.0];
                    if lc.sector.contains(&p, 1e-12) {
                        scan = scan.min(lc.eval(&p));
                    }
                }
            }
            assert!(!r.fallback && lc.sector.contains(&r.u, 1e-12));
            assert!(r.value <= scan + 1e-12, "{} vs {}", r.value, scan);
        }
    }
}
