//! Least-distance programming: the smallest vector satisfying a set of
//! linear inequalities, via nonnegative least squares (Lawson & Hanson).

use crate::matlite::{self, Mat};

const NNLS_TOL: f64 = 1e-12;
const INSET: f64 = 1e-9;

/// Nonnegative least squares `min |e u - f|` subject to `u ≥ 0`.
fn nnls(e: &Mat, f: &[f64]) -> Vec<f64> {
    let m = e.cols();
    let mut u = vec![0.0; m];
    let mut passive = vec![false; m];
    let max_outer = 3 * m + 10;

    for _ in 0..max_outer {
        let resid: Vec<f64> = e.mul_vec(&u).iter().zip(f).map(|(eu, fi)| fi - eu).collect();
        let grad = e.transpose().mul_vec(&resid);
        let entering = (0..m)
            .filter(|&j| !passive[j] && grad[j] > NNLS_TOL)
            .max_by(|&a, &b| grad[a].partial_cmp(&grad[b]).unwrap().then(b.cmp(&a)));
        let Some(entering) = entering else { break };
        passive[entering] = true;

        for _ in 0..max_outer {
            let cols: Vec<usize> = (0..m).filter(|&j| passive[j]).collect();
            let z_p = matlite::least_squares(&e.select_columns(&cols), f, matlite::DEFAULT_TOL);
            if z_p.iter().all(|&z| z > NNLS_TOL) {
                u.iter_mut().for_each(|v| *v = 0.0);
                for (k, &j) in cols.iter().enumerate() {
                    u[j] = z_p[k];
                }
                break;
            }
            let mut alpha = 1.0_f64;
            for (k, &j) in cols.iter().enumerate() {
                if z_p[k] <= NNLS_TOL {
                    let denom = u[j] - z_p[k];
                    if denom > 0.0 {
                        alpha = alpha.min(u[j] / denom);
                    }
                }
            }
            for (k, &j) in cols.iter().enumerate() {
                u[j] += alpha * (z_p[k] - u[j]);
            }
            for j in 0..m {
                if passive[j] && u[j] <= NNLS_TOL {
                    passive[j] = false;
                    u[j] = 0.0;
                }
            }
        }
    }
    u
}

/// Minimum-norm `x` with `g x ≥ h`, or `None` when the inequalities are
/// incompatible.
pub(crate) fn least_distance(g: &Mat, h: &[f64]) -> Option<Vec<f64>> {
    let (m, n) = (g.rows(), g.cols());
    assert_eq!(h.len(), m);
    if m == 0 {
        return Some(vec![0.0; n]);
    }
    let mut e = Mat::zeros(n + 1, m);
    for i in 0..m {
        for j in 0..n {
            e[(j, i)] = g[(i, j)];
        }
        e[(n, i)] = h[i];
    }
    let mut f = vec![0.0; n + 1];
    f[n] = 1.0;
    let u = nnls(&e, &f);
    let r: Vec<f64> = e.mul_vec(&u).iter().zip(&f).map(|(a, b)| a - b).collect();
    if matlite::norm2(&r) <= 1e-10 || r[n].abs() <= 1e-14 {
        return None;
    }
    Some(r[..n].iter().map(|v| -v / r[n]).collect())
}

/// Minimum-norm `w` with `a w ≤ c` and `|w_l| ≤ bound`, certified by
/// direct evaluation of the constraints (tolerance `tol·(1 + |c|)`).
pub(crate) fn min_norm_feasible(a: &Mat, c: &[f64], bound: f64, tol: f64) -> Option<Vec<f64>> {
    let (m, n) = (a.rows(), a.cols());
    let mut g = Mat::zeros(m + 2 * n, n);
    let mut h = Vec::with_capacity(m + 2 * n);
    for i in 0..m {
        for j in 0..n {
            g[(i, j)] = -a[(i, j)];
        }
        h.push(-c[i]);
    }
    for j in 0..n {
        g[(m + 2 * j, j)] = 1.0;
        g[(m + 2 * j + 1, j)] = -1.0;
        h.push(-bound);
        h.push(-bound);
    }
    // Aim slightly inside the rows so that roundoff in the solve does not
    // leave the answer just outside; retry on the exact rows if that
    // tightening is itself infeasible.
    let tightened: Vec<f64> = h
        .iter()
        .enumerate()
        .map(|(k, hk)| if k < m { hk + INSET * (1.0 + hk.abs()) } else { *hk })
        .collect();
    let w = least_distance(&g, &tightened).or_else(|| least_distance(&g, &h))?;
    let ok_rows = a
        .mul_vec(&w)
        .iter()
        .zip(c)
        .all(|(lhs, ci)| *lhs <= ci + tol * (1.0 + ci.abs()));
    let ok_bounds = w.iter().all(|v| v.abs() <= bound * (1.0 + tol));
    (ok_rows && ok_bounds).then_some(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_origin() {
        let a = Mat::from_rows(&[vec![1.0, 1.0]], 2);
        assert_eq!(min_norm_feasible(&a, &[1.0], 10.0, 1e-9).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn projection_onto_halfspace() {
        // w1 + w2 ≤ -2: closest point to the origin is (-1, -1)
        let a = Mat::from_rows(&[vec![1.0, 1.0]], 2);
        let w = min_norm_feasible(&a, &[-2.0], 10.0, 1e-9).unwrap();
        assert!((w[0] + 1.0).abs() < 1e-8 && (w[1] + 1.0).abs() < 1e-8);
        assert!(w[0] + w[1] <= -2.0);
    }

    #[test]
    fn two_halfspaces_corner() {
        // w1 ≤ -1, w2 ≥ 2
        let a = Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]], 2);
        let w = min_norm_feasible(&a, &[-1.0, -2.0], 10.0, 1e-9).unwrap();
        assert!((w[0] + 1.0).abs() < 1e-8 && (w[1] - 2.0).abs() < 1e-8);
        assert!(w[0] <= -1.0 && w[1] >= 2.0);
    }

    #[test]
    fn bound_makes_it_infeasible() {
        let a = Mat::from_rows(&[vec![1.0]], 1);
        assert!(min_norm_feasible(&a, &[-20.0], 10.0, 1e-9).is_none());
    }

    #[test]
    fn contradictory_rows() {
        let a = Mat::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]], 2);
        assert!(min_norm_feasible(&a, &[-1.0, -1.0], 10.0, 1e-9).is_none());
    }
}
