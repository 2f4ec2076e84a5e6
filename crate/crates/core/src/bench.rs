//! Randomized local problems for benchmarking the inner solvers against
//! the dense oracle.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{BenchConfig, BenchFamily};
use crate::control::{ControlSet, SectorSet};
use crate::grid::Sector;
use crate::local::LocalCost;
use crate::minimize::{minimize, oracle, Method, MinimizerConfig, MinimizerResult};

/// Random two-dimensional instance of `family`. Even instances use the unit
/// ball, odd ones a box; the sector is drawn among the four quadrants.
/// Costs that admit a bilinear term get one in three of four draws.
pub fn random_instance(family: BenchFamily, index: usize, rng: &mut ChaCha8Rng) -> LocalCost {
    let u = if index.is_multiple_of(2) {
        ControlSet::ball(2, 1.0).unwrap()
    } else {
        let a = rng.gen_range(0.2..1.0);
        let b = rng.gen_range(0.2..1.0);
        ControlSet::symmetric_box(&[a, b]).unwrap()
    };
    let mut lc = LocalCost::on(&u);
    lc.sector = SectorSet::orthant(&u, Sector::from_bits(rng.gen_range(0..4)));
    lc.linear = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), 0.0];
    lc.constant = rng.gen_range(-1.0..1.0);
    let with_bilinear = rng.gen_range(0..4) > 0;
    match family {
        BenchFamily::Cost2 | BenchFamily::CostIh => {
            let a: f64 = rng.gen_range(0.1..2.0);
            let c: f64 = rng.gen_range(0.1..2.0);
            lc.quad = [a, c, 0.0];
            if with_bilinear {
                lc.bilinear = 0.9 * (a * c).sqrt() * rng.gen_range(-1.0..1.0);
            }
        }
        BenchFamily::Mt | BenchFamily::FunctionalMtIh => {
            if with_bilinear {
                lc.bilinear = rng.gen_range(-2.0..2.0);
            }
        }
    }
    if matches!(family, BenchFamily::FunctionalMtIh | BenchFamily::CostIh) {
        lc.l1 = [rng.gen_range(0.0..0.5), rng.gen_range(0.0..0.5), 0.0];
    }
    lc
}

/// Routines run on `lc` when the configuration lists none.
pub fn applicable_methods(lc: &LocalCost) -> Vec<Method> {
    Method::ALL.into_iter().filter(|m| m.applies_to(lc)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub family: String,
    pub method: String,
    pub instance: usize,
    pub iterations: usize,
    pub converged: bool,
    pub fallback: bool,
    pub feasible: bool,
    pub value: f64,
    pub oracle_value: f64,
    /// `value − oracle_value`.
    pub gap: f64,
    /// Distance to the oracle's minimizer.
    pub l2_error: f64,
    pub wall_time: f64,
    /// Last residual ratio below the one before; empty when fewer than four
    /// iterations or no residual trace.
    pub superlinear_tail: Option<bool>,
}

/// Whether the last ratio of consecutive residuals is below the previous one.
/// A final residual at round-off level (relative to the first) counts as a
/// superlinear tail, since the ratios there only measure rounding.
pub fn superlinear_tail(residuals: &[f64]) -> Option<bool> {
    let n = residuals.len();
    if n < 5 {
        return None;
    }
    let ratio = |a: f64, b: f64| if a == 0.0 { 0.0 } else { b / a };
    let last = ratio(residuals[n - 2], residuals[n - 1]);
    let prev = ratio(residuals[n - 3], residuals[n - 2]);
    Some(last < prev || residuals[n - 1] <= 1e-13 * residuals[0])
}

fn row(
    family: BenchFamily,
    method: Method,
    instance: usize,
    lc: &LocalCost,
    r: &MinimizerResult,
    best: &MinimizerResult,
    secs: f64,
) -> BenchRow {
    let newton = matches!(method, Method::SsnSmooth | Method::SsnL1);
    let m = lc.m;
    BenchRow {
        family: family.name().into(),
        method: method.name().into(),
        instance,
        iterations: r.iterations,
        converged: r.converged,
        fallback: r.fallback,
        feasible: lc.sector.contains(&r.u, 1e-8),
        value: r.value,
        oracle_value: best.value,
        gap: r.value - best.value,
        l2_error: (0..m).map(|j| (r.u[j] - best.u[j]).powi(2)).sum::<f64>().sqrt(),
        wall_time: secs,
        superlinear_tail: if newton && !r.fallback && r.iterations >= 4 {
            superlinear_tail(&r.residuals)
        } else {
            None
        },
    }
}

/// Runs every configured routine on `cfg.instances` random instances per
/// family. The minimizer settings come from `base`.
pub fn run(cfg: &BenchConfig, base: &MinimizerConfig, seed: u64) -> Vec<BenchRow> {
    let mut rows = Vec::new();
    for (f, &family) in cfg.families.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(f as u64));
        for i in 0..cfg.instances {
            let lc = random_instance(family, i, &mut rng);
            let best = oracle(&lc, cfg.oracle_points);
            let methods = if cfg.methods.is_empty() {
                applicable_methods(&lc)
            } else {
                cfg.methods.clone()
            };
            for method in methods {
                let mc = MinimizerConfig {
                    method,
                    trace: true,
                    ..base.clone()
                };
                let start = Instant::now();
                let r = minimize(&lc, &mc, None);
                let secs = start.elapsed().as_secs_f64();
                rows.push(row(family, method, i, &lc, &r, &best, secs));
            }
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchSummary {
    pub family: String,
    pub method: String,
    pub runs: usize,
    pub converged: usize,
    pub fallbacks: usize,
    pub infeasible: usize,
    pub mean_iterations: f64,
    pub max_gap: f64,
    pub mean_l2_error: f64,
    pub mean_wall_time: f64,
    pub superlinear: usize,
    pub superlinear_checked: usize,
}

pub fn summarize(rows: &[BenchRow]) -> Vec<BenchSummary> {
    let mut keys: Vec<(String, String)> = Vec::new();
    for r in rows {
        let key = (r.family.clone(), r.method.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(family, method)| {
            let sel: Vec<&BenchRow> = rows
                .iter()
                .filter(|r| r.family == family && r.method == method)
                .collect();
            let n = sel.len() as f64;
            BenchSummary {
                runs: sel.len(),
                converged: sel.iter().filter(|r| r.converged).count(),
                fallbacks: sel.iter().filter(|r| r.fallback).count(),
                infeasible: sel.iter().filter(|r| !r.feasible).count(),
                mean_iterations: sel.iter().map(|r| r.iterations as f64).sum::<f64>() / n,
                max_gap: sel
                    .iter()
                    .filter(|r| r.converged)
                    .map(|r| r.gap)
                    .fold(f64::NEG_INFINITY, f64::max),
                mean_l2_error: sel.iter().map(|r| r.l2_error).sum::<f64>() / n,
                mean_wall_time: sel.iter().map(|r| r.wall_time).sum::<f64>() / n,
                superlinear: sel.iter().filter(|r| r.superlinear_tail == Some(true)).count(),
                superlinear_checked: sel.iter().filter(|r| r.superlinear_tail.is_some()).count(),
                family,
                method,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_detection() {
        assert_eq!(superlinear_tail(&[1.0, 0.5, 0.1, 1e-3, 1e-8]), Some(true));
        assert_eq!(superlinear_tail(&[1.0, 0.5, 0.25, 0.125, 0.0625]), Some(false));
        assert_eq!(superlinear_tail(&[1.0, 0.1]), None);
        assert_eq!(superlinear_tail(&[0.6, 0.5, 5e-4, 6e-11, 2e-16]), Some(true));
    }

    #[test]
    fn instances_are_seeded() {
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        for i in 0..5 {
            assert_eq!(
                random_instance(BenchFamily::CostIh, i, &mut a),
                random_instance(BenchFamily::CostIh, i, &mut b)
            );
        }
    }

    #[test]
    fn small_run_matches_oracle() {
        let cfg = BenchConfig {
            instances: 6,
            oracle_points: 40_000,
            ..Default::default()
        };
        let rows = run(&cfg, &MinimizerConfig::default(), 11);
        assert!(!rows.is_empty());
        for r in &rows {
            assert!(r.feasible, "{r:?}");
            if r.converged && r.method != "comparison" {
                assert!(r.gap <= 1e-3, "{r:?}");
            }
        }
    }
}
