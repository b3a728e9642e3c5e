//! Unsupervised baseline hashers.

mod itq;
mod lsh;
mod pca;
mod sh;
mod sklsh;

pub use itq::{itq_encode, itq_fit, itq_fit_traced, itq_from_pca, itq_refine, orthogonality_error, random_rotation, ItqModel, ItqTrace, DEFAULT_ITQ_ITERS};
pub use lsh::{lsh_encode, lsh_fit, LshModel};
pub use pca::{covariance, pcah_encode, pcah_fit, PcaModel};
pub use sh::{mode_eigenvalue, sh_encode, sh_fit, sh_from_pca, ShMode, ShModel};
pub use sklsh::{median_bandwidth, sklsh_encode, sklsh_fit, sklsh_with_bandwidth, SklshModel};
