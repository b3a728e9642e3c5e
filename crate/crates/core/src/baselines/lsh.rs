use crate::codes::{BinaryCodeSet, HashEncoder};
use crate::error::{Error, Result};
use crate::numerics::{mat_mul, Matrix, Rng};

/// Random hyperplane LSH: `sign(xᵀ l_k)` with `l_k ~ N(0, I)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LshModel {
    /// `d x m`, one Gaussian direction per column.
    pub w: Matrix,
}

pub fn lsh_fit(d: usize, m: usize, seed: u64) -> Result<LshModel> {
    if d == 0 || m == 0 {
        return Err(Error::invalid(format!("LSH needs d >= 1 and m >= 1 (got d={d}, m={m})")));
    }
    Ok(LshModel {
        w: Rng::new(seed).gaussian_matrix(d, m),
    })
}

pub fn lsh_encode(model: &LshModel, x: &Matrix) -> Result<BinaryCodeSet> {
    model.encode(x)
}

impl HashEncoder for LshModel {
    fn bits(&self) -> usize {
        self.w.cols()
    }

    fn input_dim(&self) -> usize {
        self.w.rows()
    }

    fn project(&self, x: &Matrix) -> Result<Matrix> {
        mat_mul(x, &self.w)
    }
}
