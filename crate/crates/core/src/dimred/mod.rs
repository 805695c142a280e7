//! Low-dimensional embeddings of the raw response-time vectors.
//!
//! Both methods standardize each column before embedding.

pub mod pca;
pub mod tsne;

pub use pca::{pca_fit, pca_transform, PcaFit};
pub use tsne::{tsne_embed, TsneConfig, TsneResult};
