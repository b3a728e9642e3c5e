use super::pca::PcaModel;
use crate::codes::{BinaryCodeSet, HashEncoder};
use crate::error::{Error, Result};
use crate::numerics::{mat_mul, mat_mul_tn, svd, Matrix, Rng};

pub const DEFAULT_ITQ_ITERS: usize = 50;

/// PCA followed by an orthogonal rotation that pulls the projected data
/// towards the vertices of the binary hypercube.
#[derive(Clone, Debug, PartialEq)]
pub struct ItqModel {
    pub pca: PcaModel,
    /// `m x m`, orthogonal.
    pub rotation: Matrix,
}

/// Per-iteration record of the alternating minimization.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ItqTrace {
    /// `||B − V R||²_F` after each rotation update.
    pub losses: Vec<f64>,
    /// `||RᵀR − I||_∞` after each rotation update.
    pub orthogonality: Vec<f64>,
}

/// Random Gaussian `m x m` matrix orthogonalized through its SVD.
pub fn random_rotation(m: usize, seed: u64) -> Result<Matrix> {
    let g = Rng::derive(seed, "itq-rotation").gaussian_matrix(m, m);
    Ok(svd(&g)?.u)
}

/// ±1 sign matrix with the crate-wide tie convention (0 maps to −1).
fn signs(z: &Matrix) -> Matrix {
    Matrix::from_fn(z.rows(), z.cols(), |r, c| if z.get(r, c) > 0.0 { 1.0 } else { -1.0 })
}

fn quantization_loss(b: &Matrix, z: &Matrix) -> f64 {
    b.as_slice().iter().zip(z.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn orthogonality_error(r: &Matrix) -> f64 {
    let rtr = mat_mul_tn(r, r).expect("square");
    rtr.sub(&Matrix::identity(r.cols())).expect("same shape").max_abs()
}

/// Alternates `B = sign(V R)` with the orthogonal Procrustes update
/// `R = U Ŵᵀ` where `Vᵀ B = U Σ Ŵᵀ`.
pub fn itq_refine(v: &Matrix, init: Matrix, iters: usize) -> Result<(Matrix, ItqTrace)> {
    let m = v.cols();
    if init.shape() != (m, m) {
        return Err(Error::shape("itq_refine", format!("projections {}", v.shape_str()), format!("rotation {}", init.shape_str())));
    }
    if iters == 0 {
        return Err(Error::invalid("ITQ needs at least one iteration"));
    }
    let mut r = init;
    let mut trace = ItqTrace::default();
    for _ in 0..iters {
        let b = signs(&mat_mul(v, &r)?);
        let dec = svd(&mat_mul_tn(v, &b)?)?;
        r = mat_mul(&dec.u, &dec.vt)?;
        let z = mat_mul(v, &r)?;
        trace.losses.push(quantization_loss(&b, &z));
        trace.orthogonality.push(orthogonality_error(&r));
    }
    Ok((r, trace))
}

/// ITQ on top of an already fitted PCA (whose width sets the code length).
pub fn itq_from_pca(pca: PcaModel, x: &Matrix, iters: usize, seed: u64) -> Result<(ItqModel, ItqTrace)> {
    let v = pca.transform(x)?;
    let init = random_rotation(pca.n_components(), seed)?;
    let (rotation, trace) = itq_refine(&v, init, iters)?;
    Ok((ItqModel { pca, rotation }, trace))
}

pub fn itq_fit_traced(x: &Matrix, m: usize, iters: usize, seed: u64) -> Result<(ItqModel, ItqTrace)> {
    if m == 0 || m > x.cols() {
        return Err(Error::invalid(format!("ITQ needs 1 <= m <= d (m={m}, d={})", x.cols())));
    }
    itq_from_pca(PcaModel::fit(x, m)?, x, iters, seed)
}

pub fn itq_fit(x: &Matrix, m: usize, iters: usize, seed: u64) -> Result<ItqModel> {
    Ok(itq_fit_traced(x, m, iters, seed)?.0)
}

pub fn itq_encode(model: &ItqModel, x: &Matrix) -> Result<BinaryCodeSet> {
    model.encode(x)
}

impl HashEncoder for ItqModel {
    fn bits(&self) -> usize {
        self.rotation.cols()
    }

    fn input_dim(&self) -> usize {
        self.pca.dim()
    }

    fn project(&self, x: &Matrix) -> Result<Matrix> {
        mat_mul(&self.pca.transform(x)?, &self.rotation)
    }
}
