use super::eigen::{largest_entry_sign, two_rows};
use super::Matrix;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Thin singular value decomposition `a = u * diag(sigma) * vt`.
#[derive(Clone, Debug)]
pub struct Svd {
    /// `rows x k` with orthonormal columns, `k = min(rows, cols)`.
    pub u: Matrix,
    /// Non-negative, descending.
    pub sigma: Vec<f64>,
    /// `k x cols` with orthonormal rows.
    pub vt: Matrix,
}

/// One-sided (Hestenes) Jacobi SVD.
///
/// Columns are rotated pairwise until every pair is orthogonal to working
/// precision. Left singular vectors belonging to numerically zero singular
/// values are completed to an orthonormal set. Each (u_i, v_i) pair is
/// flipped so the largest-magnitude entry of u_i is positive.
pub fn svd(a: &Matrix) -> Result<Svd> {
    if a.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("svd"));
    }
    if a.rows() < a.cols() {
        let t = svd_tall(&a.transpose())?;
        return Ok(Svd {
            u: t.vt.transpose(),
            sigma: t.sigma,
            vt: t.u.transpose(),
        });
    }
    svd_tall(a)
}

fn svd_tall(a: &Matrix) -> Result<Svd> {
    let (m, n) = a.shape();
    // Row i of `w` is column i of the working matrix; row i of `v` is column i of V.
    let mut w = a.transpose();
    let mut v = Matrix::identity(n);
    let tol = f64::EPSILON * (m.max(1) as f64);

    let mut converged = n < 2;
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let (wi, wj) = two_rows(&mut w, i, j);
                let alpha: f64 = wi.iter().map(|x| x * x).sum();
                let beta: f64 = wj.iter().map(|x| x * x).sum();
                let gamma: f64 = wi.iter().zip(wj.iter()).map(|(x, y)| x * y).sum();
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(wi, wj, c, s);
                let (vi, vj) = two_rows(&mut v, i, j);
                rotate_pair(vi, vj, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence("svd", MAX_SWEEPS));
    }

    let norms: Vec<f64> = w.iter_rows().map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    let smax = norms.iter().cloned().fold(0.0, f64::max);
    let rank_tol = smax * 1e-13 * (m.max(n) as f64);

    let sigma: Vec<f64> = order.iter().map(|&i| norms[i]).collect();
    // Columns of U, one per row of `ucols`.
    let mut ucols: Vec<Option<Vec<f64>>> = order
        .iter()
        .map(|&i| {
            if norms[i] > rank_tol && norms[i] > 0.0 {
                Some(w.row(i).iter().map(|x| x / norms[i]).collect())
            } else {
                None
            }
        })
        .collect();
    complete_orthonormal(&mut ucols, m);

    let mut u = Matrix::zeros(m, n);
    let mut vt = Matrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        let col = ucols[k].as_ref().expect("completed");
        let sign = largest_entry_sign(col);
        for (r, &x) in col.iter().enumerate().take(m) {
            u.set(r, k, sign * x);
        }
        for (c, &x) in v.row(i).iter().enumerate() {
            vt.set(k, c, sign * x);
        }
    }
    Ok(Svd { u, sigma, vt })
}

fn rotate_pair(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let xa = *a;
        let yb = *b;
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

/// Fills `None` slots with unit vectors orthogonal to every other slot,
/// drawing candidates from the standard basis.
fn complete_orthonormal(cols: &mut [Option<Vec<f64>>], dim: usize) {
    let mut basis = 0usize;
    for k in 0..cols.len() {
        if cols[k].is_some() {
            continue;
        }
        while basis < dim {
            let mut cand = vec![0.0; dim];
            cand[basis] = 1.0;
            basis += 1;
            // Two Gram-Schmidt passes.
            for _ in 0..2 {
                for other in cols.iter().flatten() {
                    let dot: f64 = cand.iter().zip(other).map(|(a, b)| a * b).sum();
                    cand.iter_mut().zip(other).for_each(|(a, b)| *a -= dot * b);
                }
            }
            let norm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-6 {
                cand.iter_mut().for_each(|x| *x /= norm);
                cols[k] = Some(cand);
                break;
            }
        }
    }
}
