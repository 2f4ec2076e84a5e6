//! Dense solves for the small Newton systems (at most 7 unknowns).

use nalgebra::{SMatrix, SVector};

pub(crate) const N: usize = 7;

pub(crate) type Mat = [[f64; N]; N];
pub(crate) type Vector = [f64; N];

/// Solves the leading `n × n` block of `a x = b`. Returns `None` when the
/// matrix is numerically singular.
pub(crate) fn solve(a: &Mat, b: &Vector, n: usize) -> Option<Vector> {
    debug_assert!(n <= N);
    let mut m = SMatrix::<f64, N, N>::identity();
    let mut rhs = SVector::<f64, N>::zeros();
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = a[i][j];
        }
        rhs[i] = b[i];
    }
    let lu = m.lu();
    let u = lu.u();
    let diag = (0..n).map(|i| u[(i, i)].abs());
    let (lo, hi) = diag.fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
    if !(lo > 1e-13 * hi) || !lo.is_finite() {
        return None;
    }
    let x = lu.solve(&rhs)?;
    let mut out = [0.0; N];
    for i in 0..n {
        out[i] = x[i];
    }
    out.iter().all(|v| v.is_finite()).then_some(out)
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let mut a = [[0.0; N]; N];
        a[0][0] = 2.0;
        a[0][1] = 1.0;
        a[1][0] = 1.0;
        a[1][1] = 3.0;
        let mut b = [0.0; N];
        b[0] = 3.0;
        b[1] = 5.0;
        let x = solve(&a, &b, 2).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn detects_singular() {
        let mut a = [[0.0; N]; N];
        a[0][0] = 1.0;
        a[0][1] = 2.0;
        a[1][0] = 2.0;
        a[1][1] = 4.0;
        assert!(solve(&a, &[1.0; N], 2).is_none());
    }
}
