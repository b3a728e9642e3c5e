use std::f64::consts::{FRAC_PI_2, PI};

use super::pca::PcaModel;
use crate::codes::{BinaryCodeSet, HashEncoder};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// One analytic eigenfunction: harmonic `harmonic` along PCA direction `direction`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShMode {
    pub direction: usize,
    pub harmonic: usize,
}

/// Spectral hashing with the separable uniform-distribution eigenfunctions.
#[derive(Clone, Debug, PartialEq)]
pub struct ShModel {
    pub pca: PcaModel,
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
    /// One per output bit, ascending analytic eigenvalue.
    pub modes: Vec<ShMode>,
}

/// Eigenvalue ordering key `(j / range)²`; infinite for a zero range.
pub fn mode_eigenvalue(harmonic: usize, range: f64) -> f64 {
    if range > 0.0 {
        (harmonic as f64 / range).powi(2)
    } else {
        f64::INFINITY
    }
}

pub fn sh_fit(x: &Matrix, m: usize) -> Result<ShModel> {
    if m == 0 {
        return Err(Error::invalid("spectral hashing needs m >= 1"));
    }
    let npca = m.min(x.cols());
    sh_from_pca(PcaModel::fit(x, npca)?, x, m)
}

/// Spectral hashing over an already fitted PCA basis.
pub fn sh_from_pca(pca: PcaModel, x: &Matrix, m: usize) -> Result<ShModel> {
    let v = pca.transform(x)?;
    let k = pca.n_components();
    let mut mins = vec![f64::INFINITY; k];
    let mut maxs = vec![f64::NEG_INFINITY; k];
    for row in v.iter_rows() {
        for (p, &val) in row.iter().enumerate() {
            mins[p] = mins[p].min(val);
            maxs[p] = maxs[p].max(val);
        }
    }

    // Every direction offers harmonics 1..=m; the m smallest eigenvalues
    // overall can never need more than that from a single direction.
    let mut candidates: Vec<(f64, ShMode)> = Vec::with_capacity(k * m);
    for p in 0..k {
        let range = maxs[p] - mins[p];
        for j in 1..=m {
            candidates.push((mode_eigenvalue(j, range), ShMode { direction: p, harmonic: j }));
        }
    }
    candidates.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.direction.cmp(&b.1.direction))
            .then(a.1.harmonic.cmp(&b.1.harmonic))
    });
    let modes: Vec<ShMode> = candidates.iter().take(m).map(|c| c.1).collect();
    if let Some(bad) = modes.iter().find(|mode| maxs[mode.direction] <= mins[mode.direction]) {
        return Err(Error::invalid(format!(
            "spectral hashing selected PCA direction {} whose training range is empty (min = max = {})",
            bad.direction, mins[bad.direction]
        )));
    }
    Ok(ShModel { pca, mins, maxs, modes })
}

pub fn sh_encode(model: &ShModel, x: &Matrix) -> Result<BinaryCodeSet> {
    model.encode(x)
}

impl HashEncoder for ShModel {
    fn bits(&self) -> usize {
        self.modes.len()
    }

    fn input_dim(&self) -> usize {
        self.pca.dim()
    }

    /// `sin(π/2 + j π (v_p − min_p) / (max_p − min_p))` per mode.
    fn project(&self, x: &Matrix) -> Result<Matrix> {
        let v = self.pca.transform(x)?;
        Ok(Matrix::from_fn(v.rows(), self.modes.len(), |r, b| {
            let mode = self.modes[b];
            let p = mode.direction;
            let t = (v.get(r, p) - self.mins[p]) / (self.maxs[p] - self.mins[p]);
            (FRAC_PI_2 + mode.harmonic as f64 * PI * t).sin()
        }))
    }
}
