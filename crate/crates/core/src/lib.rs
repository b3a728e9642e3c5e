//! Learning-to-hash for image retrieval.
//!
//! An end-to-end convolutional hashing network (features, linear hash
//! projection, sigmoid quantization, classifier loss) alongside five
//! unsupervised baselines (LSH, PCAH, PCA-ITQ, spectral hashing, SKLSH), all
//! producing packed binary codes that are ranked exhaustively in Hamming
//! space and scored with mAP, precision-recall, precision@k and precision
//! within a Hamming radius.

pub mod error;
pub mod numerics;

pub use error::{Error, Result};
pub mod codes;
pub mod datasets;
pub mod eval;
pub mod index;
pub mod baselines;
pub mod deep;
pub mod model;
