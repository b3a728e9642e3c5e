//! Convolutional hashing network: CNN features, a linear hash projection,
//! a sigmoid, and a classifier trained with softmax cross-entropy.

mod gradcheck;
pub mod layers;
mod net;
mod tensor;
mod train;

pub use gradcheck::{default_eps, grad_check, grad_check_with, relative_error, BlockError};
pub use net::{ForwardPass, LayerSpec, NetParams, NetSpec, Network, ParamBlock, WeightInit};
pub use tensor::{Real, Tensor4};
pub use train::{image_batch, train, train_with, write_train_log, EpochLog, TrainConfig, Trained};

use crate::codes::{BinaryCodeSet, HashEncoder};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Rows per forward pass during encoding.
pub const ENCODE_BATCH: usize = 256;

/// Code bits are set where the sigmoid activation exceeds this.
pub const DEEP_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct DeepHashModel {
    pub spec: NetSpec,
    pub params: NetParams<f32>,
}

impl DeepHashModel {
    pub fn new(spec: NetSpec, params: NetParams<f32>) -> Result<Self> {
        params.check_against(&spec)?;
        Ok(DeepHashModel { spec, params })
    }
}

impl HashEncoder for DeepHashModel {
    fn bits(&self) -> usize {
        self.spec.bits().expect("validated spec")
    }

    fn input_dim(&self) -> usize {
        self.spec.input.len()
    }

    /// Sigmoid activations of the hash layer.
    fn project(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape("deep project", x.shape_str(), format!("_x{}", self.input_dim())));
        }
        let net = Network::new(&self.spec, &self.params)?;
        let m = self.bits();
        let mut out = Vec::with_capacity(x.rows() * m);
        let all: Vec<usize> = (0..x.rows()).collect();
        for idx in all.chunks(ENCODE_BATCH) {
            let a = net.hash_activations(&image_batch::<f32>(x, idx, &self.spec))?;
            out.extend(a.data.iter().map(|&v| f64::from(v)));
        }
        Matrix::new(x.rows(), m, out)
    }

    fn threshold(&self) -> f64 {
        DEEP_THRESHOLD
    }
}

pub fn deep_encode(model: &DeepHashModel, x: &Matrix) -> Result<BinaryCodeSet> {
    model.encode(x)
}
