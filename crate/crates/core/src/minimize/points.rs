//! Finite control sets: the comparison method and the dense oracle.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use super::MinimizerResult;
use crate::control::{Orientation, SectorSet};
use crate::error::{Error, Result};
use crate::grid::{Point, MAX_DIM};
use crate::local::LocalCost;

/// Layout of the comparison point sets. Ball sets are global polar
/// (`m = 2`) or spherical (`m = 3`) grids plus the origin, filtered by
/// sector; box sets are Cartesian grids over the sector's box.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointLayout {
    pub polar_angles: usize,
    pub polar_radii: usize,
    pub sphere_azimuths: usize,
    pub sphere_polars: usize,
    pub sphere_radii: usize,
    /// Points per axis for box sets; 0 picks a count close to the ball sets.
    pub box_per_axis: usize,
}

impl Default for PointLayout {
    fn default() -> Self {
        PointLayout {
            polar_angles: 160,
            polar_radii: 8,
            sphere_azimuths: 64,
            sphere_polars: 16,
            sphere_radii: 5,
            box_per_axis: 0,
        }
    }
}

impl PointLayout {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            self.polar_angles,
            self.polar_radii,
            self.sphere_azimuths,
            self.sphere_polars,
            self.sphere_radii,
        ];
        if counts.contains(&0) {
            return Err(Error::Config("comparison point counts must be positive".into()));
        }
        Ok(())
    }

    fn box_points(&self, m: usize) -> usize {
        if self.box_per_axis > 0 {
            return self.box_per_axis;
        }
        match m {
            1 => 1280,
            2 => 36,
            _ => 11,
        }
    }

    /// Size of the unfiltered ball set for `m` controls.
    pub fn ball_size(&self, m: usize) -> usize {
        match m {
            2 => self.polar_angles * self.polar_radii + 1,
            3 => self.sphere_azimuths * self.sphere_polars * self.sphere_radii + 1,
            _ => self.polar_angles * self.polar_radii + 1,
        }
    }
}

fn ball_points(m: usize, radius: f64, layout: &PointLayout) -> Vec<Point> {
    let mut pts = vec![[0.0; MAX_DIM]];
    match m {
        2 => {
            for i in 0..layout.polar_angles {
                let t = 2.0 * PI * i as f64 / layout.polar_angles as f64;
                for j in 1..=layout.polar_radii {
                    let r = radius * j as f64 / layout.polar_radii as f64;
                    pts.push([r * t.cos(), r * t.sin(), 0.0]);
                }
            }
        }
        3 => {
            for i in 0..layout.sphere_azimuths {
                let a = 2.0 * PI * i as f64 / layout.sphere_azimuths as f64;
                for j in 0..layout.sphere_polars {
                    let p = PI * (j as f64 + 0.5) / layout.sphere_polars as f64;
                    for l in 1..=layout.sphere_radii {
                        let r = radius * l as f64 / layout.sphere_radii as f64;
                        pts.push([r * p.sin() * a.cos(), r * p.sin() * a.sin(), r * p.cos()]);
                    }
                }
            }
        }
        _ => {
            let n = layout.polar_angles * layout.polar_radii;
            for i in 0..n {
                let v = -radius + 2.0 * radius * (i as f64 + 0.5) / n as f64;
                pts.push([v, 0.0, 0.0]);
            }
        }
    }
    pts
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| {
        if n == 1 || lo == hi {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    })
}

/// Calls `f` on every point of the Cartesian grid with `n` points per axis
/// over `[lower, upper]` (first `m` axes).
fn for_each_cartesian(m: usize, lower: &Point, upper: &Point, n: usize, f: &mut dyn FnMut(&Point)) {
    let axes: Vec<Vec<f64>> = (0..m).map(|j| linspace(lower[j], upper[j], n).collect()).collect();
    let mut idx = [0usize; MAX_DIM];
    loop {
        let mut u = [0.0; MAX_DIM];
        for j in 0..m {
            u[j] = axes[j][idx[j]];
        }
        f(&u);
        let mut j = 0;
        loop {
            if j == m {
                return;
            }
            idx[j] += 1;
            if idx[j] < n {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

fn in_intervals(s: &SectorSet, u: &Point) -> bool {
    (0..s.m)
        .all(|j| u[j] >= s.lower[j] - crate::control::SECTOR_SLACK && u[j] <= s.upper[j] + crate::control::SECTOR_SLACK)
}

type CacheKey = Vec<u64>;

thread_local! {
    static FILTERED: RefCell<HashMap<CacheKey, Rc<Vec<Point>>>> = RefCell::new(HashMap::new());
}

const CACHE_LIMIT: usize = 256;

fn cache_key(s: &SectorSet, radius: f64, layout: &PointLayout) -> CacheKey {
    let mut key = vec![
        s.m as u64,
        radius.to_bits(),
        layout.polar_angles as u64,
        layout.polar_radii as u64,
        layout.sphere_azimuths as u64,
        layout.sphere_polars as u64,
        layout.sphere_radii as u64,
    ];
    for j in 0..s.m {
        key.push(s.lower[j].to_bits());
        key.push(s.upper[j].to_bits());
    }
    key
}

/// Comparison points of the sector; falls back to the projection of the
/// origin when no point of the global set lies in it.
pub(super) fn with_comparison_points<R>(lc: &LocalCost, layout: &PointLayout, f: impl FnOnce(&[Point]) -> R) -> R {
    let s = &lc.sector;
    match s.radius {
        Some(radius) => {
            let key = cache_key(s, radius, layout);
            let cached = FILTERED.with(|c| c.borrow().get(&key).cloned());
            let pts = match cached {
                Some(p) => p,
                None => {
                    let mut pts: Vec<Point> = ball_points(s.m, radius, layout)
                        .into_iter()
                        .filter(|u| in_intervals(s, u))
                        .collect();
                    if pts.is_empty() {
                        pts.push(s.project(&[0.0; MAX_DIM]));
                    }
                    let pts = Rc::new(pts);
                    FILTERED.with(|c| {
                        let mut c = c.borrow_mut();
                        if c.len() >= CACHE_LIMIT {
                            c.clear();
                        }
                        c.insert(key, pts.clone());
                    });
                    pts
                }
            };
            f(&pts)
        }
        None => {
            let mut pts = Vec::new();
            for_each_cartesian(s.m, &s.lower, &s.upper, layout.box_points(s.m), &mut |u| pts.push(*u));
            f(&pts)
        }
    }
}

/// The finite control set used by the comparison method for this sector.
pub fn comparison_points(lc: &LocalCost, layout: &PointLayout) -> Vec<Point> {
    with_comparison_points(lc, layout, |p| p.to_vec())
}

/// Best point of a finite set; ties keep the first. Iterations count the
/// evaluated points.
pub fn comparison(lc: &LocalCost, points: &[Point]) -> MinimizerResult {
    assert!(!points.is_empty(), "comparison needs at least one point");
    let mut best = points[0];
    let mut best_value = lc.eval(&best);
    for u in &points[1..] {
        let v = lc.eval(u);
        if v < best_value {
            best_value = v;
            best = *u;
        }
    }
    let mut r = MinimizerResult::new(lc, best, points.len(), true);
    r.value = best_value;
    r
}

/// Dense enumeration of the sector with about `resolution` points: polar or
/// spherical grids per orthant for cone-shaped ball sectors, Cartesian grids
/// otherwise. Intended for verification only.
pub fn oracle(lc: &LocalCost, resolution: usize) -> MinimizerResult {
    let s = &lc.sector;
    let mut best = s.project(&[0.0; MAX_DIM]);
    let mut best_value = lc.eval(&best);
    let mut count = 1usize;
    let mut visit = |u: &Point| {
        count += 1;
        let v = lc.eval(u);
        if v < best_value {
            best_value = v;
            best = *u;
        }
    };
    for_each_oracle_point(s, resolution.max(1), &mut visit);
    let mut r = MinimizerResult::new(lc, best, count, true);
    r.value = best_value;
    r
}

fn for_each_oracle_point(s: &SectorSet, resolution: usize, f: &mut dyn FnMut(&Point)) {
    let m = s.m;
    let Some(radius) = s.radius else {
        let n = (resolution as f64).powf(1.0 / m as f64).round().max(2.0) as usize;
        for_each_cartesian(m, &s.lower, &s.upper, n, f);
        return;
    };
    if !s.is_cone() {
        let mut lo = [0.0; MAX_DIM];
        let mut hi = [0.0; MAX_DIM];
        for j in 0..m {
            lo[j] = s.lower[j].max(-radius);
            hi[j] = s.upper[j].min(radius);
        }
        let n = (resolution as f64).powf(1.0 / m as f64).round().max(2.0) as usize;
        for_each_cartesian(m, &lo, &hi, n, &mut |u| {
            if s.contains(u, 0.0) {
                f(u)
            }
        });
        return;
    }

    // Cone sector: sample the positive orthant of the ball in the non-zero
    // components and flip signs for every orthant the cone allows.
    let active: Vec<usize> = (0..m)
        .filter(|&j| s.orientation(j) != Some(Orientation::Zero))
        .collect();
    let choices: Vec<Vec<f64>> = active
        .iter()
        .map(|&j| match s.orientation(j) {
            Some(Orientation::Positive) => vec![1.0],
            Some(Orientation::Negative) => vec![-1.0],
            _ => vec![1.0, -1.0],
        })
        .collect();
    let orthants: usize = choices.iter().map(|c| c.len()).product();
    let per = (resolution / orthants.max(1)).max(1);
    let dim = active.len();
    let mut pattern = vec![0usize; dim];
    loop {
        let signs: Vec<f64> = (0..dim).map(|a| choices[a][pattern[a]]).collect();
        let mut emit = |dir: &[f64], r: f64| {
            let mut u = [0.0; MAX_DIM];
            for (a, &j) in active.iter().enumerate() {
                u[j] = signs[a] * r * dir[a];
            }
            f(&u);
        };
        match dim {
            0 => {}
            1 => {
                for r in linspace(0.0, radius, per) {
                    emit(&[1.0], r);
                }
            }
            2 => {
                let n = (per as f64).sqrt().round().max(2.0) as usize;
                for t in linspace(0.0, FRAC_PI_2, n) {
                    for r in linspace(0.0, radius, n) {
                        emit(&[t.cos(), t.sin()], r);
                    }
                }
            }
            _ => {
                let n = (per as f64).cbrt().round().max(2.0) as usize;
                for t in linspace(0.0, FRAC_PI_2, n) {
                    for p in linspace(0.0, FRAC_PI_2, n) {
                        for r in linspace(0.0, radius, n) {
                            emit(&[p.sin() * t.cos(), p.sin() * t.sin(), p.cos()], r);
                        }
                    }
                }
            }
        }
        let mut a = 0;
        loop {
            if a == dim {
                return;
            }
            pattern[a] += 1;
            if pattern[a] < choices[a].len() {
                break;
            }
            pattern[a] = 0;
            a += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::ControlSet;
    use crate::grid::Sector;

    fn quarter_disk() -> LocalCost {
        let u = ControlSet::ball(2, 1.0).unwrap();
        let mut lc = LocalCost::on(&u);
        lc.sector = SectorSet::orthant(&u, Sector::from_indices(&[0, 1]));
        lc
    }

    #[test]
    fn default_ball_set_sizes() {
        let layout = PointLayout::default();
        assert_eq!(ball_points(2, 1.0, &layout).len(), 1281);
        assert_eq!(ball_points(3, 1.0, &layout).len(), 5121);
    }

    #[test]
    fn comparison_single_point() {
        let lc = quarter_disk();
        let r = comparison(&lc, &[[0.2, 0.1, 0.0]]);
        assert_eq!(r.u, [0.2, 0.1, 0.0]);
    }

    #[test]
    fn sector_points_are_feasible() {
        let mut lc = quarter_disk();
        lc.linear = [-1.0, -0.5, 0.0];
        let pts = comparison_points(&lc, &PointLayout::default());
        assert!(pts.len() > 300);
        assert!(pts.iter().all(|u| lc.sector.contains(u, 1e-12)));
    }

    #[test]
    fn oracle_near_analytic_minimizer() {
        let mut lc = quarter_disk();
        lc.quad = [1.0, 1.0, 0.0];
        lc.linear = [-0.3, -0.4, 0.0];
        let r = oracle(&lc, 1_000_000);
        assert!((r.u[0] - 0.3).abs() < 2e-3 && (r.u[1] - 0.4).abs() < 2e-3, "{:?}", r.u);
        assert!(r.value - lc.eval(&[0.3, 0.4, 0.0]) < 1e-6);
    }

    #[test]
    fn oracle_matches_comparison_on_same_points() {
        let mut lc = quarter_disk();
        lc.linear = [0.4, -0.9, 0.0];
        let pts = comparison_points(&lc, &PointLayout::default());
        let brute = pts.iter().map(|u| lc.eval(u)).fold(f64::INFINITY, f64::min);
        assert_eq!(comparison(&lc, &pts).value, brute);
    }
}
