//! Dense linear algebra and seeded randomness.

mod eigen;
mod matrix;
mod rng;
mod svd;

pub use eigen::{sym_eigen, SymEigen};
pub use matrix::{mat_mul, mat_mul_nt, mat_mul_tn, Matrix};
pub use rng::{derive_seed, gaussian_matrix, Rng};
pub use svd::{svd, Svd};
