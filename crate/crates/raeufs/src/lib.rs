//! RAEUFS: robust autoencoder-based unsupervised feature selection with
//! adaptive graph learning.
//!
//! The crate provides the full pipeline as a library:
//!
//! - [`matrix`] / [`svd`] / [`rng`]: dense kernel, SVD, seeded RNG
//! - [`data`]: dataset ingestion, unit-interval scaling, outlier injection
//! - [`network`]: selector + RSR autoencoder, losses, gradients, Adam
//! - [`graph`]: adaptive affinity graph and Laplacian terms
//! - [`stiefel`]: generalized power iteration for the pseudo-label subproblem
//! - [`trainer`]: the alternating-minimization loop, ranking, reduction
//! - [`eval`]: k-means, accuracy/NMI/silhouette, the repetition protocol
//! - [`synthetic`]: blob generator used by experiments and tests
//!
//! Everything numeric is generic over [`scalar::Scalar`]; the `Mat` alias at
//! the crate root pins the f64 instantiation used by the CLI and the file
//! formats.

pub mod data;
pub mod error;
pub mod eval;
pub mod graph;
pub mod matrix;
pub mod network;
pub mod rng;
pub mod scalar;
pub mod stiefel;
pub mod svd;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use rng::RngState;
pub use scalar::Scalar;

/// Default dense matrix type (64-bit precision).
pub type Mat = Matrix<f64>;
/// Single-precision matrix, for callers that accept the accuracy trade-off.
pub type Mat32 = Matrix<f32>;
