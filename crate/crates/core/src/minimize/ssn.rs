//! Semismooth Newton method for smooth costs on cone-shaped ball sectors.
//!
//! With `π` the clamp onto the sector's cone and `ρ` the radius, a point is
//! optimal iff `u = P_K(u − ϑ∇F(u))` with `P_K(p) = π(p) / max(1, ‖π(p)‖/ρ)`.
//! Introducing `p` and the scaling `β` gives the system
//!
//! ```text
//! E(u,p,β) = ( βu − π(p),  u − ϑ∇F(u) − p,  β − max(1, ‖π(p)‖/ρ) ) = 0
//! ```
//!
//! which is solved by Newton steps with a generalized Jacobian.

use super::linalg::{self, Mat, Vector, N};
use super::{chambolle_pock, start_point, MinimizerConfig, MinimizerResult};
use crate::control::Orientation;
use crate::grid::{Point, MAX_DIM};
use crate::local::LocalCost;

struct Cone {
    m: usize,
    radius: f64,
    orient: [Orientation; MAX_DIM],
}

impl Cone {
    /// Clamp onto the cone and the active-set indicator.
    fn clamp(&self, p: &Point) -> (Point, Point) {
        let mut pi = [0.0; MAX_DIM];
        let mut chi = [0.0; MAX_DIM];
        for j in 0..self.m {
            let (v, a) = match self.orient[j] {
                Orientation::Positive if p[j] > 0.0 => (p[j], 1.0),
                Orientation::Negative if p[j] < 0.0 => (p[j], 1.0),
                Orientation::Free => (p[j], 1.0),
                _ => (0.0, 0.0),
            };
            pi[j] = v;
            chi[j] = a;
        }
        (pi, chi)
    }
}

fn scale_for(lc: &LocalCost, cfg: &MinimizerConfig) -> f64 {
    cfg.ssn_scale.unwrap_or_else(|| {
        let h = lc.hessian();
        let inf_norm = (0..lc.m)
            .map(|i| (0..lc.m).map(|j| h[i][j].abs()).sum::<f64>())
            .fold(0.0, f64::max);
        1.0 / inf_norm.max(1.0)
    })
}

/// `‖u − P_K(u − ϑ∇F(u))‖`, zero exactly at stationary points.
pub fn smooth_residual(lc: &LocalCost, u: &Point, scale: f64) -> f64 {
    let g = lc.gradient(u);
    let mut p = [0.0; MAX_DIM];
    for j in 0..lc.m {
        p[j] = u[j] - scale * g[j];
    }
    let q = lc.sector.project(&p);
    super::dist(&u[..lc.m], &q[..lc.m])
}

fn residual(lc: &LocalCost, cone: &Cone, scale: f64, z: &Vector) -> Vector {
    let m = cone.m;
    let mut u = [0.0; MAX_DIM];
    let mut p = [0.0; MAX_DIM];
    u[..m].copy_from_slice(&z[..m]);
    p[..m].copy_from_slice(&z[m..2 * m]);
    let beta = z[2 * m];
    let (pi, _) = cone.clamp(&p);
    let g = lc.gradient(&u);
    let mut e = [0.0; N];
    for j in 0..m {
        e[j] = beta * u[j] - pi[j];
        e[m + j] = u[j] - scale * g[j] - p[j];
    }
    e[2 * m] = beta - (linalg::norm(&pi[..m]) / cone.radius).max(1.0);
    e
}

fn jacobian(lc: &LocalCost, cone: &Cone, scale: f64, z: &Vector) -> Mat {
    let m = cone.m;
    let mut p = [0.0; MAX_DIM];
    p[..m].copy_from_slice(&z[m..2 * m]);
    let beta = z[2 * m];
    let (pi, chi) = cone.clamp(&p);
    let hess = lc.hessian();
    let mut j = [[0.0; N]; N];
    for i in 0..m {
        j[i][i] = beta;
        j[i][m + i] = -chi[i];
        j[i][2 * m] = z[i];
        for k in 0..m {
            j[m + i][k] = if i == k { 1.0 } else { 0.0 } - scale * hess[i][k];
        }
        j[m + i][m + i] = -1.0;
    }
    let norm_pi = linalg::norm(&pi[..m]);
    if norm_pi > cone.radius {
        for k in 0..m {
            j[2 * m][m + k] = -chi[k] * pi[k] / (cone.radius * norm_pi);
        }
    }
    j[2 * m][2 * m] = 1.0;
    j
}

pub fn ssn_smooth(lc: &LocalCost, cfg: &MinimizerConfig, warm: Option<&Point>) -> MinimizerResult {
    let m = lc.m;
    let applicable = lc.sector.is_ball() && lc.sector.is_cone() && lc.l1[..m].iter().all(|&w| w == 0.0);
    if !applicable {
        return chambolle_pock(lc, cfg, warm).flagged();
    }
    let mut orient = [Orientation::Zero; MAX_DIM];
    for (j, o) in orient.iter_mut().enumerate().take(m) {
        *o = lc.sector.orientation(j).expect("cone sector");
    }
    let cone = Cone {
        m,
        radius: lc.sector.radius.expect("ball sector"),
        orient,
    };
    let scale = scale_for(lc, cfg);
    let n = 2 * m + 1;

    let u0 = start_point(lc, warm);
    let g0 = lc.gradient(&u0);
    let mut z = [0.0; N];
    let mut p0 = [0.0; MAX_DIM];
    for j in 0..m {
        z[j] = u0[j];
        p0[j] = u0[j] - scale * g0[j];
        z[m + j] = p0[j];
    }
    let (pi0, _) = cone.clamp(&p0);
    z[2 * m] = (linalg::norm(&pi0[..m]) / cone.radius).max(1.0);

    let mut e = residual(lc, &cone, scale, &z);
    let mut e_norm = linalg::norm(&e[..n]);
    let mut residuals = Vec::new();
    if cfg.trace {
        residuals.push(e_norm);
    }
    let mut converged = e_norm == 0.0;
    let mut iterations = 0;
    while !converged && iterations < cfg.max_iters {
        iterations += 1;
        let jac = jacobian(lc, &cone, scale, &z);
        let mut rhs = [0.0; N];
        for i in 0..n {
            rhs[i] = -e[i];
        }
        let Some(delta) = linalg::solve(&jac, &rhs, n) else {
            return chambolle_pock(lc, cfg, warm).flagged();
        };
        let mut t = 1.0;
        let mut trial = z;
        let mut trial_e;
        let mut trial_norm;
        let mut halvings = 0;
        loop {
            for i in 0..n {
                trial[i] = z[i] + t * delta[i];
            }
            trial_e = residual(lc, &cone, scale, &trial);
            trial_norm = linalg::norm(&trial_e[..n]);
            if !cfg.line_search || trial_norm < e_norm || halvings >= 10 {
                break;
            }
            t *= 0.5;
            halvings += 1;
        }
        if !cfg.line_search || trial_norm < e_norm {
            z = trial;
            e = trial_e;
            e_norm = trial_norm;
        } else {
            // No damped step helped; take the full step to escape.
            t = 1.0;
            for i in 0..n {
                z[i] += delta[i];
            }
            e = residual(lc, &cone, scale, &z);
            e_norm = linalg::norm(&e[..n]);
        }
        if cfg.trace {
            residuals.push(e_norm);
        }
        let step = t * linalg::norm(&delta[..n]);
        if step < cfg.tolerance || e_norm == 0.0 {
            converged = true;
        }
    }
    let mut p = [0.0; MAX_DIM];
    p[..m].copy_from_slice(&z[m..2 * m]);
    let u = lc.sector.project(&p);
    let mut r = MinimizerResult::new(lc, u, iterations, converged);
    r.residuals = residuals;
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{ControlSet, SectorSet};
    use crate::grid::Sector;

    fn quarter(quad: f64, linear: [f64; 2]) -> LocalCost {
        let u = ControlSet::ball(2, 1.0).unwrap();
        let mut lc = LocalCost::on(&u);
        lc.sector = SectorSet::orthant(&u, Sector::from_indices(&[0, 1]));
        lc.quad = [quad, quad, 0.0];
        lc.linear = [linear[0], linear[1], 0.0];
        lc
    }

    #[test]
    fn zero_linear_gives_origin() {
        let lc = quarter(1.0, [0.0, 0.0]);
        let r = ssn_smooth(&lc, &MinimizerConfig::default(), None);
        assert!(r.converged && !r.fallback);
        assert!(r.u[..2].iter().all(|c| c.abs() < 1e-12), "{:?}", r.u);
    }

    #[test]
    fn interior_optimum_fast() {
        let lc = quarter(2.0, [-0.6, -0.8]);
        let cfg = MinimizerConfig {
            trace: true,
            ..Default::default()
        };
        let r = ssn_smooth(&lc, &cfg, None);
        assert!(r.converged && r.iterations <= 6, "{}", r.iterations);
        assert!(*r.residuals.last().unwrap() < 1e-10);
        assert!((r.u[0] - 0.3).abs() < 1e-10 && (r.u[1] - 0.4).abs() < 1e-10);
    }

    #[test]
    fn boundary_optimum_on_circle() {
        let lc = quarter(1.0, [-3.0, -4.0]);
        let r = ssn_smooth(&lc, &MinimizerConfig::default(), None);
        assert!(r.converged);
        assert!((r.u[0] - 0.6).abs() < 1e-8 && (r.u[1] - 0.8).abs() < 1e-8, "{:?}", r.u);
    }

    #[test]
    fn negative_sector() {
        let u = ControlSet::ball(2, 1.0).unwrap();
        let mut lc = LocalCost::on(&u);
        lc.sector = SectorSet::orthant(&u, Sector::from_indices(&[]));
        lc.quad = [1.0, 1.0, 0.0];
        lc.linear = [0.2, 3.0, 0.0];
        let r = ssn_smooth(&lc, &MinimizerConfig::default(), None);
        assert!(r.converged);
        // optimum of the disk is (-0.2,-3) scaled onto the circle
        let n = (0.04f64 + 9.0).sqrt();
        assert!(
            (r.u[0] + 0.2 / n).abs() < 1e-8 && (r.u[1] + 3.0 / n).abs() < 1e-8,
            "{:?}",
            r.u
        );
    }
}
