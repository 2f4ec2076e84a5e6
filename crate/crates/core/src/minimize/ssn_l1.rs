//! Semismooth Newton method for costs with an ℓ1 term,
//! `min_{u ∈ K} E(u) + Σ α_j |u_j|` with `E` the smooth part.
//!
//! Writing `h(u) = Σ α_j|u_j| + ι_K(u)`, optimality reads `q = −∇E(u)`,
//! `u ∈ ∂h*(q)`. The set-valued `∂h*` is replaced by the gradient of the
//! conjugate of `h + (ε/2)‖·‖²`, which is single valued and piecewise smooth:
//!
//! ```text
//! ball: ψ(q) = w / max(1, ‖w‖/ρ),  w_j = π_j(S_α(q_j)) / ε
//! box:  ψ_j(q) = clamp(S_α(q_j) / ε, lo_j, hi_j)
//! ```
//!
//! with `S_α` soft thresholding and `π_j` the clamp onto the sector's cone.
//! Since `ψ(εx) = prox_{h/ε}(x)`, a point is optimal iff
//! `u = ψ(εu − ∇E(u))`, so with the shifted dual variable `q = εu − ∇E(u)`
//! the pair `(q, u)` solves
//!
//! ```text
//! G(q, u) = (q − εu + ∇E(u), u − ψ(q)) = 0
//! ```
//!
//! for every `ε > 0`; `ε` only sets the width of the ramps of `ψ` and with it
//! the path of the Newton iteration. Where the Newton matrix is singular
//! (on a ramp of a cost without curvature) the proximal gradient step
//! `u ← ψ(εu − ∇E(u))` is taken instead.

use super::linalg::{self, Mat, Vector, N};
use super::{oracle, start_point, MinimizerConfig, MinimizerResult};
use crate::control::Orientation;
use crate::grid::{Point, MAX_DIM};
use crate::local::LocalCost;

/// Points of the comparison grid used when Newton cannot proceed.
const FALLBACK_POINTS: usize = 10_000;

type Jac = [[f64; MAX_DIM]; MAX_DIM];

fn soft(q: f64, alpha: f64) -> f64 {
    q.signum() * (q.abs() - alpha).max(0.0)
}

fn psi_ball(lc: &LocalCost, eps: f64, q: &Point) -> (Point, Jac) {
    let m = lc.m;
    let radius = lc.sector.radius.expect("ball sector");
    let mut w = [0.0; MAX_DIM];
    let mut dw = [0.0; MAX_DIM];
    for j in 0..m {
        let s = soft(q[j], lc.l1[j]);
        let v = match lc.sector.orientation(j).expect("cone sector") {
            Orientation::Positive => s.max(0.0),
            Orientation::Negative => s.min(0.0),
            Orientation::Free => s,
            Orientation::Zero => 0.0,
        };
        w[j] = v / eps;
        dw[j] = if v != 0.0 { 1.0 / eps } else { 0.0 };
    }
    let nw = linalg::norm(&w[..m]);
    let mut d = [[0.0; MAX_DIM]; MAX_DIM];
    if nw <= radius {
        for j in 0..m {
            d[j][j] = dw[j];
        }
        return (w, d);
    }
    let mut psi = [0.0; MAX_DIM];
    let mut n = [0.0; MAX_DIM];
    for j in 0..m {
        psi[j] = radius * w[j] / nw;
        n[j] = w[j] / nw;
    }
    for i in 0..m {
        for j in 0..m {
            let proj = if i == j { 1.0 } else { 0.0 } - n[i] * n[j];
            d[i][j] = radius / nw * proj * dw[j];
        }
    }
    (psi, d)
}

fn psi_box(lc: &LocalCost, eps: f64, q: &Point) -> (Point, Jac) {
    let m = lc.m;
    let (lo, hi) = (&lc.sector.lower, &lc.sector.upper);
    let mut psi = [0.0; MAX_DIM];
    let mut d = [[0.0; MAX_DIM]; MAX_DIM];
    for j in 0..m {
        let t = soft(q[j], lc.l1[j]) / eps;
        psi[j] = t.clamp(lo[j], hi[j]);
        if q[j].abs() > lc.l1[j] && t > lo[j] && t < hi[j] {
            d[j][j] = 1.0 / eps;
        }
    }
    (psi, d)
}

fn fallback(lc: &LocalCost) -> MinimizerResult {
    oracle(lc, FALLBACK_POINTS).flagged()
}

/// Dispatches on the constraint type of the sector.
pub fn ssn_l1(lc: &LocalCost, cfg: &MinimizerConfig, warm: Option<&Point>) -> MinimizerResult {
    if lc.sector.is_ball() {
        ssn_l1_ball(lc, cfg, warm)
    } else {
        ssn_l1_box(lc, cfg, warm)
    }
}

pub fn ssn_l1_ball(lc: &LocalCost, cfg: &MinimizerConfig, warm: Option<&Point>) -> MinimizerResult {
    if !lc.sector.is_ball() || !lc.sector.is_cone() || !lc.is_convex() {
        return fallback(lc);
    }
    newton(lc, cfg, warm, psi_ball)
}

pub fn ssn_l1_box(lc: &LocalCost, cfg: &MinimizerConfig, warm: Option<&Point>) -> MinimizerResult {
    if lc.sector.is_ball() || !lc.is_convex() {
        return fallback(lc);
    }
    newton(lc, cfg, warm, psi_box)
}

fn residual(lc: &LocalCost, eps: f64, psi: fn(&LocalCost, f64, &Point) -> (Point, Jac), z: &Vector) -> Vector {
    let m = lc.m;
    let mut q = [0.0; MAX_DIM];
    let mut u = [0.0; MAX_DIM];
    q[..m].copy_from_slice(&z[..m]);
    u[..m].copy_from_slice(&z[m..2 * m]);
    let g = lc.gradient(&u);
    let (p, _) = psi(lc, eps, &q);
    let mut r = [0.0; N];
    for j in 0..m {
        r[j] = q[j] - eps * u[j] + g[j];
        r[m + j] = u[j] - p[j];
    }
    r
}

fn newton(
    lc: &LocalCost,
    cfg: &MinimizerConfig,
    warm: Option<&Point>,
    psi: fn(&LocalCost, f64, &Point) -> (Point, Jac),
) -> MinimizerResult {
    let m = lc.m;
    let n = 2 * m;
    let hess = lc.hessian();
    let eps = cfg.epsilon.unwrap_or_else(|| {
        let inf_norm = (0..m)
            .map(|i| (0..m).map(|k| hess[i][k].abs()).sum::<f64>())
            .fold(0.0, f64::max);
        inf_norm.max(1.0)
    });
    let u0 = start_point(lc, warm);
    let g0 = lc.gradient(&u0);
    let mut z = [0.0; N];
    for j in 0..m {
        z[j] = eps * u0[j] - g0[j];
        z[m + j] = u0[j];
    }
    let mut r = residual(lc, eps, psi, &z);
    let mut r_norm = linalg::norm(&r[..n]);
    let mut residuals = Vec::new();
    if cfg.trace {
        residuals.push(r_norm);
    }
    let mut converged = r_norm == 0.0;
    let mut iterations = 0;
    while !converged && iterations < cfg.max_iters {
        iterations += 1;
        let mut q = [0.0; MAX_DIM];
        q[..m].copy_from_slice(&z[..m]);
        let (_, dpsi) = psi(lc, eps, &q);
        let mut jac: Mat = [[0.0; N]; N];
        for i in 0..m {
            jac[i][i] = 1.0;
            jac[m + i][m + i] = 1.0;
            jac[i][m + i] = -eps;
            for k in 0..m {
                jac[i][m + k] += hess[i][k];
                jac[m + i][k] = -dpsi[i][k];
            }
        }
        let mut rhs = [0.0; N];
        for i in 0..n {
            rhs[i] = -r[i];
        }
        let Some(delta) = linalg::solve(&jac, &rhs, n) else {
            // Singular on a ramp (no curvature there): proximal gradient step.
            let mut u = [0.0; MAX_DIM];
            u[..m].copy_from_slice(&z[m..n]);
            let g = lc.gradient(&u);
            let mut q = [0.0; MAX_DIM];
            for j in 0..m {
                q[j] = eps * u[j] - g[j];
            }
            let (next, _) = psi(lc, eps, &q);
            let gn = lc.gradient(&next);
            let mut step = 0.0;
            for j in 0..m {
                let qj = eps * next[j] - gn[j];
                step += (qj - z[j]).powi(2) + (next[j] - z[m + j]).powi(2);
                z[j] = qj;
                z[m + j] = next[j];
            }
            r = residual(lc, eps, psi, &z);
            r_norm = linalg::norm(&r[..n]);
            if cfg.trace {
                residuals.push(r_norm);
            }
            if step.sqrt() < cfg.tolerance || r_norm == 0.0 {
                converged = true;
            }
            continue;
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=10 {
            let mut trial = z;
            for i in 0..n {
                trial[i] += t * delta[i];
            }
            let tr = residual(lc, eps, psi, &trial);
            let tn = linalg::norm(&tr[..n]);
            if !cfg.line_search || tn < r_norm {
                z = trial;
                r = tr;
                r_norm = tn;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            t = 1.0;
            for i in 0..n {
                z[i] += delta[i];
            }
            r = residual(lc, eps, psi, &z);
            r_norm = linalg::norm(&r[..n]);
        }
        if cfg.trace {
            residuals.push(r_norm);
        }
        if t * linalg::norm(&delta[..n]) < cfg.tolerance || r_norm == 0.0 {
            converged = true;
        }
    }
    let mut q = [0.0; MAX_DIM];
    q[..m].copy_from_slice(&z[..m]);
    let (u, _) = psi(lc, eps, &q);
    let mut result = MinimizerResult::new(lc, u, iterations, converged);
    result.residuals = residuals;
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{ControlSet, SectorSet};
    use crate::grid::Sector;

    fn quarter(quad: f64, linear: [f64; 2], alpha: f64) -> LocalCost {
        let u = ControlSet::ball(2, 1.0).unwrap();
        let mut lc = LocalCost::on(&u);
        lc.sector = SectorSet::orthant(&u, Sector::from_indices(&[0, 1]));
        lc.quad = [quad, quad, 0.0];
        lc.linear = [linear[0], linear[1], 0.0];
        lc.l1 = [alpha, alpha, 0.0];
        lc
    }

    #[test]
    fn dead_zone_gives_zero() {
        let lc = quarter(1.0, [-0.05, -0.08], 0.1);
        let r = ssn_l1_ball(&lc, &MinimizerConfig::default(), None);
        assert!(r.converged && !r.fallback);
        assert_eq!(&r.u[..2], &[0.0, 0.0]);
    }

    #[test]
    fn one_sided_shrinkage() {
        let lc = quarter(1.0, [-0.05, -0.5], 0.1);
        let cfg = MinimizerConfig {
            tolerance: 1e-10,
            ..Default::default()
        };
        let r = ssn_l1_ball(&lc, &cfg, None);
        assert!(r.converged);
        assert!(r.u[0].abs() < 1e-12 && (r.u[1] - 0.4).abs() < 1e-7, "{:?}", r.u);
    }

    #[test]
    fn box_without_l1_clamps() {
        let u = ControlSet::symmetric_box(&[0.3, 0.3]).unwrap();
        let mut lc = LocalCost::on(&u);
        lc.quad = [2.0, 1.0, 0.0];
        lc.linear = [-1.0, 0.1, 0.0];
        lc.l1 = [0.0, 0.0, 0.0];
        let cfg = MinimizerConfig {
            tolerance: 1e-10,
            ..Default::default()
        };
        let r = ssn_l1_box(&lc, &cfg, None);
        assert!(r.converged);
        assert!((r.u[0] - 0.3).abs() < 1e-8 && (r.u[1] + 0.1).abs() < 1e-7, "{:?}", r.u);
    }
}
