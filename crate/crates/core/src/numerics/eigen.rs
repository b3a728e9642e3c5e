use super::Matrix;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;
const SYMMETRY_TOL: f64 = 1e-9;
const OFF_DIAG_TOL: f64 = 1e-12;

/// Eigendecomposition of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymEigen {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, aligned with `values`.
    pub vectors: Matrix,
}

/// Cyclic Jacobi eigendecomposition.
///
/// Sweeps every (p, q) pair until the off-diagonal Frobenius norm drops
/// below `1e-12 * ||s||_F`. Each eigenvector is flipped so its largest
/// magnitude entry is positive.
pub fn sym_eigen(s: &Matrix) -> Result<SymEigen> {
    let n = s.rows();
    if s.cols() != n {
        return Err(Error::shape("sym_eigen", s.shape_str(), "square matrix"));
    }
    let asym = s.asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }

    // Symmetrize exactly so the row/column updates below stay consistent.
    let mut a = Matrix::from_fn(n, n, |i, j| 0.5 * (s.get(i, j) + s.get(j, i)));
    // Rows of `vt` are the eigenvectors; keeps the rotation updates contiguous.
    let mut vt = Matrix::identity(n);
    let tol = OFF_DIAG_TOL * a.frobenius();

    let mut converged = false;
    for _sweep in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                rotate(&mut a, &mut vt, p, q, apq);
            }
        }
    }
    if !converged && off_diagonal_norm(&a) > tol {
        return Err(Error::NoConvergence("sym_eigen", MAX_SWEEPS));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(j, j).total_cmp(&a.get(i, i)).then(i.cmp(&j)));

    let values = order.iter().map(|&i| a.get(i, i)).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let v = vt.row(i);
        let sign = largest_entry_sign(v);
        for (r, &x) in v.iter().enumerate() {
            vectors.set(r, col, sign * x);
        }
    }
    Ok(SymEigen { values, vectors })
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut sum = 0.0;
    for i in 0..n {
        for (j, v) in a.row(i).iter().enumerate() {
            if i != j {
                sum += v * v;
            }
        }
    }
    sum.sqrt()
}

fn rotate(a: &mut Matrix, vt: &mut Matrix, p: usize, q: usize, apq: f64) {
    let n = a.rows();
    let app = a.get(p, p);
    let aqq = a.get(q, q);
    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a.get(k, p);
        let akq = a.get(k, q);
        let np = c * akp - s * akq;
        let nq = s * akp + c * akq;
        a.set(k, p, np);
        a.set(p, k, np);
        a.set(k, q, nq);
        a.set(q, k, nq);
    }
    a.set(p, p, app - t * apq);
    a.set(q, q, aqq + t * apq);
    a.set(p, q, 0.0);
    a.set(q, p, 0.0);

    let (rp, rq) = two_rows(vt, p, q);
    for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
        let vp = *x;
        let vq = *y;
        *x = c * vp - s * vq;
        *y = s * vp + c * vq;
    }
}

/// Mutable views of two distinct rows.
pub(crate) fn two_rows(m: &mut Matrix, p: usize, q: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert!(p < q);
    let cols = m.cols();
    let (head, tail) = m.as_mut_slice().split_at_mut(q * cols);
    (&mut head[p * cols..(p + 1) * cols], &mut tail[..cols])
}

/// +1 if the largest-magnitude entry (first on ties) is non-negative, else -1.
pub(crate) fn largest_entry_sign(v: &[f64]) -> f64 {
    let mut best = 0.0_f64;
    let mut sign = 1.0;
    for &x in v {
        if x.abs() > best {
            best = x.abs();
            sign = if x < 0.0 { -1.0 } else { 1.0 };
        }
    }
    sign
}
