//! Primal-dual iteration for `min_{u ∈ K} F(u)` with the identity as coupling
//! operator: the dual step uses the resolvent of `F*` (through the Moreau
//! identity) and the primal step is the projection onto `K`.

use super::{comparison, comparison_points, dist, start_point, MinimizerConfig, MinimizerResult};
use crate::grid::{Point, MAX_DIM};
use crate::local::LocalCost;

/// `(I + (1/σ)∂F)^{-1}(z)`, or `None` when it has no closed form (ℓ1 with a
/// bilinear coupling) or is singular.
fn resolvent(lc: &LocalCost, sigma: f64, z: &Point) -> Option<Point> {
    let m = lc.m;
    let mut w = [0.0; MAX_DIM];
    if lc.bilinear == 0.0 || m < 2 {
        for j in 0..m {
            let t = sigma * z[j] - lc.linear[j];
            let shrunk = t.signum() * (t.abs() - lc.l1[j]).max(0.0);
            let denom = sigma + lc.quad[j];
            if denom <= 0.0 {
                return None;
            }
            w[j] = shrunk / denom;
        }
        return Some(w);
    }
    if lc.l1[..m].iter().any(|&v| v != 0.0) {
        return None;
    }
    let a = sigma + lc.quad[0];
    let c = sigma + lc.quad[1];
    let b = lc.bilinear;
    let det = a * c - b * b;
    if det.abs() < 1e-14 * (a * c).abs().max(1e-300) {
        return None;
    }
    let r0 = sigma * z[0] - lc.linear[0];
    let r1 = sigma * z[1] - lc.linear[1];
    w[0] = (c * r0 - b * r1) / det;
    w[1] = (a * r1 - b * r0) / det;
    for j in 2..m {
        w[j] = (sigma * z[j] - lc.linear[j]) / (sigma + lc.quad[j]);
    }
    Some(w)
}

pub fn chambolle_pock(lc: &LocalCost, cfg: &MinimizerConfig, warm: Option<&Point>) -> MinimizerResult {
    let m = lc.m;
    let (tau, sigma, theta) = (cfg.tau, cfg.sigma, cfg.theta);
    let mut u = start_point(lc, warm);
    let mut ubar = u;
    let mut y = lc.gradient(&u);
    if resolvent(lc, sigma, &y).is_none() {
        let pts = comparison_points(lc, &cfg.points);
        return comparison(lc, &pts).flagged();
    }
    let mut residuals = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        let mut z = [0.0; MAX_DIM];
        for j in 0..m {
            z[j] = y[j] / sigma + ubar[j];
        }
        let w = resolvent(lc, sigma, &z).expect("resolvent checked above");
        let mut y_new = [0.0; MAX_DIM];
        let mut step = [0.0; MAX_DIM];
        for j in 0..m {
            y_new[j] = sigma * (z[j] - w[j]);
            step[j] = u[j] - tau * y_new[j];
        }
        let u_new = lc.sector.project(&step);
        let mut ubar_new = [0.0; MAX_DIM];
        for j in 0..m {
            ubar_new[j] = u_new[j] + theta * (u_new[j] - u[j]);
        }
        let dy = dist(&y_new[..m], &y[..m]);
        let du = dist(&u_new[..m], &u[..m]);
        let dbar = dist(&ubar_new[..m], &ubar[..m]);
        let displacement = (dy * dy + du * du + dbar * dbar).sqrt();
        y = y_new;
        u = u_new;
        ubar = ubar_new;
        if cfg.trace {
            residuals.push(displacement);
        }
        if displacement < cfg.tolerance {
            converged = true;
            break;
        }
    }
    let mut r = MinimizerResult::new(lc, u, iterations, converged);
    r.residuals = residuals;
    r
}
