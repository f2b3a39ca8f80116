//! Statistical models: coarse k-means, product quantizers, PCA, diagonal GMMs and
//! Hamming-space cluster centers, plus the codebook file that bundles them.

mod binary;
pub mod codebook;
mod gmm;
mod kmeans;
mod pca;
mod pq;

pub use binary::{
    binary_centers_train, binary_centers_train_traced, binary_objective, BinaryCenters,
    DEFAULT_BINARY_CLUSTERS,
};
pub use codebook::{fingerprint_hex, CodebookSet, Model, CODEBOOK_MAGIC, CODEBOOK_VERSION};
pub use gmm::{gmm_train, gmm_train_traced, GMMModel, VARIANCE_FLOOR};
pub use kmeans::{kmeans_train, kmeans_train_traced, KMeansModel};
pub use pca::{pca_fit, PCAModel};
pub(crate) use pq::center_distance as pq_center_distance;
pub use pq::{pq_train, PQModel};
