use std::f64::consts::PI;

use crate::codes::{BinaryCodeSet, HashEncoder};
use crate::error::{Error, Result};
use crate::numerics::{mat_mul, Matrix, Rng};

const BANDWIDTH_SAMPLE: usize = 200;

/// Shift-invariant kernel LSH: bit = `cos(wᵀx + b) + t > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct SklshModel {
    /// `d x m`, standard normal entries divided by `bandwidth`.
    pub w: Matrix,
    pub b: Vec<f64>,
    pub t: Vec<f64>,
    pub bandwidth: f64,
}

/// Median pairwise Euclidean distance over a seeded subset of at most 200 rows.
pub fn median_bandwidth(x: &Matrix, seed: u64) -> Result<f64> {
    if x.rows() < 2 {
        return Err(Error::invalid("bandwidth heuristic needs at least two rows"));
    }
    let k = x.rows().min(BANDWIDTH_SAMPLE);
    let idx = Rng::derive(seed, "sklsh-bandwidth").sample_indices(x.rows(), k);
    let mut d = Vec::with_capacity(k * (k - 1) / 2);
    for a in 0..k {
        for b in (a + 1)..k {
            let (ra, rb) = (x.row(idx[a]), x.row(idx[b]));
            d.push(ra.iter().zip(rb).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt());
        }
    }
    d.sort_by(f64::total_cmp);
    let mid = d.len() / 2;
    Ok(if d.len() % 2 == 0 { 0.5 * (d[mid - 1] + d[mid]) } else { d[mid] })
}

pub fn sklsh_with_bandwidth(d: usize, m: usize, bandwidth: f64, seed: u64) -> Result<SklshModel> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::invalid(format!("SKLSH bandwidth must be positive, got {bandwidth}")));
    }
    if d == 0 || m == 0 {
        return Err(Error::invalid(format!("SKLSH needs d >= 1 and m >= 1 (got d={d}, m={m})")));
    }
    let mut rng = Rng::derive(seed, "sklsh");
    let w = rng.gaussian_matrix(d, m).scale(1.0 / bandwidth);
    let b = (0..m).map(|_| rng.uniform_range(0.0, 2.0 * PI)).collect();
    let t = (0..m).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
    Ok(SklshModel { w, b, t, bandwidth })
}

pub fn sklsh_fit(x: &Matrix, m: usize, seed: u64) -> Result<SklshModel> {
    let bandwidth = median_bandwidth(x, seed)?;
    sklsh_with_bandwidth(x.cols(), m, bandwidth, seed)
}

pub fn sklsh_encode(model: &SklshModel, x: &Matrix) -> Result<BinaryCodeSet> {
    model.encode(x)
}

impl HashEncoder for SklshModel {
    fn bits(&self) -> usize {
        self.w.cols()
    }

    fn input_dim(&self) -> usize {
        self.w.rows()
    }

    fn project(&self, x: &Matrix) -> Result<Matrix> {
        let mut z = mat_mul(x, &self.w)?;
        for r in 0..z.rows() {
            for (k, v) in z.row_mut(r).iter_mut().enumerate() {
                *v = (*v + self.b[k]).cos() + self.t[k];
            }
        }
        Ok(z)
    }
}
