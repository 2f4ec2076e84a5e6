//! ℓ1 costs by sign splitting: on a part of the sector where every control
//! component has a fixed sign `s_j`, `w_j|u_j| = s_j w_j u_j` is linear, so
//! the problem becomes smooth. Components whose interval contains zero in its
//! interior are split into a nonnegative and a nonpositive half.

use super::{chambolle_pock, ssn_smooth, MinimizerConfig, MinimizerResult};
use crate::grid::{Point, MAX_DIM};
use crate::local::LocalCost;

fn solve_smooth(lc: &LocalCost, cfg: &MinimizerConfig, warm: Option<&Point>) -> MinimizerResult {
    if lc.sector.is_ball() && lc.sector.is_cone() {
        ssn_smooth(lc, cfg, warm)
    } else {
        chambolle_pock(lc, cfg, warm)
    }
}

pub fn splitting(lc: &LocalCost, cfg: &MinimizerConfig, warm: Option<&Point>) -> MinimizerResult {
    let m = lc.m;
    if lc.l1[..m].iter().all(|&w| w == 0.0) {
        return solve_smooth(lc, cfg, warm);
    }
    // Sign choices per component: +1, -1, or both when zero is interior.
    let choices: Vec<Vec<f64>> = (0..m)
        .map(|j| {
            let (lo, hi) = (lc.sector.lower[j], lc.sector.upper[j]);
            match (lo < 0.0, hi > 0.0) {
                (true, true) => vec![1.0, -1.0],
                (false, _) => vec![1.0],
                (true, false) => vec![-1.0],
            }
        })
        .collect();
    let mut pattern = [0usize; MAX_DIM];
    let mut best: Option<MinimizerResult> = None;
    let mut iterations = 0;
    let mut converged = true;
    let mut fallback = false;
    loop {
        let mut sub = lc.clone();
        for j in 0..m {
            let s = choices[j][pattern[j]];
            sub.l1[j] = 0.0;
            sub.linear[j] += s * lc.l1[j];
            if choices[j].len() == 2 {
                if s > 0.0 {
                    sub.sector.lower[j] = 0.0;
                } else {
                    sub.sector.upper[j] = 0.0;
                }
            }
        }
        let start = warm.map(|w| sub.sector.project(w));
        let r = solve_smooth(&sub, cfg, start.as_ref());
        iterations += r.iterations;
        converged &= r.converged;
        fallback |= r.fallback;
        let r = MinimizerResult::new(lc, r.u, r.iterations, r.converged);
        if best.as_ref().is_none_or(|b| r.value < b.value) {
            best = Some(r);
        }

        let mut j = 0;
        loop {
            if j == m {
                let mut best = best.expect("at least one sign pattern");
                best.iterations = iterations;
                best.converged = converged;
                best.fallback = fallback;
                return best;
            }
            pattern[j] += 1;
            if pattern[j] < choices[j].len() {
                break;
            }
            pattern[j] = 0;
            j += 1;
        }
    }
}
