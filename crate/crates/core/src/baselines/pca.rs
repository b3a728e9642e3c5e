use crate::codes::{BinaryCodeSet, HashEncoder};
use crate::error::{Error, Result};
use crate::numerics::{mat_mul, mat_mul_tn, sym_eigen, Matrix};

/// Principal directions of a training set.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `d x m`, orthonormal columns ordered by decreasing variance.
    pub components: Matrix,
    pub eigenvalues: Vec<f64>,
}

/// Sample covariance with an `n - 1` denominator.
pub fn covariance(x: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = x.rows();
    if n < 2 {
        return Err(Error::invalid(format!("covariance needs at least two rows, got {n}")));
    }
    let mean = x.column_means();
    let mut centered = x.clone();
    for r in 0..n {
        centered.row_mut(r).iter_mut().zip(&mean).for_each(|(v, m)| *v -= m);
    }
    let cov = mat_mul_tn(&centered, &centered)?.scale(1.0 / (n - 1) as f64);
    Ok((mean, cov))
}

impl PcaModel {
    /// Full eigenbasis of the covariance; truncate with [`PcaModel::truncate`].
    pub fn fit_full(x: &Matrix) -> Result<PcaModel> {
        let (mean, cov) = covariance(x)?;
        let eig = sym_eigen(&cov)?;
        Ok(PcaModel {
            mean,
            components: eig.vectors,
            eigenvalues: eig.values,
        })
    }

    pub fn fit(x: &Matrix, m: usize) -> Result<PcaModel> {
        if m == 0 || m > x.cols() {
            return Err(Error::invalid(format!("PCA needs 1 <= m <= d (m={m}, d={})", x.cols())));
        }
        Ok(PcaModel::fit_full(x)?.truncate(m))
    }

    /// Leading `m` directions.
    pub fn truncate(&self, m: usize) -> PcaModel {
        PcaModel {
            mean: self.mean.clone(),
            components: self.components.leading_cols(m),
            eigenvalues: self.eigenvalues[..m.min(self.eigenvalues.len())].to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.components.rows()
    }

    pub fn n_components(&self) -> usize {
        self.components.cols()
    }

    /// `(x − mean) · components`.
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.dim() {
            return Err(Error::shape("PCA transform", format!("model expects d={}", self.dim()), format!("data has d={}", x.cols())));
        }
        let mut centered = x.clone();
        for r in 0..x.rows() {
            centered.row_mut(r).iter_mut().zip(&self.mean).for_each(|(v, m)| *v -= m);
        }
        mat_mul(&centered, &self.components)
    }
}

/// PCAH: top-`m` covariance eigenvectors, thresholded at zero.
pub fn pcah_fit(x: &Matrix, m: usize) -> Result<PcaModel> {
    PcaModel::fit(x, m)
}

pub fn pcah_encode(model: &PcaModel, x: &Matrix) -> Result<BinaryCodeSet> {
    model.encode(x)
}

impl HashEncoder for PcaModel {
    fn bits(&self) -> usize {
        self.n_components()
    }

    fn input_dim(&self) -> usize {
        self.dim()
    }

    fn project(&self, x: &Matrix) -> Result<Matrix> {
        self.transform(x)
    }
}
