//! Dual Gaussian visual-semantic embeddings.
//!
//! Items (from precomputed feature vectors) and tags are embedded as
//! spherical Gaussians in one space. Tag sets are fused in natural-parameter
//! coordinates, the model is trained with a bidirectional margin loss under
//! Mahalanobis, KL or squared 2-Wasserstein distance, and the trained model
//! drives retrieval, re-ordering, variance reports and 2-D tag maps.

pub mod applications;
pub mod dataset;
pub mod divergences;
pub mod encoders;
pub mod error;
pub mod gaussian;
pub mod model_io;
pub mod training;

pub use dataset::{generate_synthetic, load_dataset, save_dataset, Dataset, Item, SyntheticSpec};
pub use divergences::{distance, DistanceKind};
pub use encoders::ModelParams;
pub use error::{Error, Result};
pub use gaussian::{ExpectationParams, NaturalParams, SphericalGaussian};
pub use model_io::{load_model, save_model};
pub use training::{fit, TrainConfig, TrainReport};
