//! Fair weight-sharing supernet training and path-priority architecture
//! search over layered, multi-component search spaces.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix it to `f64`.

pub mod attention;
pub mod error;
pub mod linalg;
pub mod oracle;
pub mod sampler;
pub mod scalar;
pub mod search;
pub mod searchspace;
pub mod stats;
pub mod supernet;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use searchspace::{Architecture, LayerGroup, SearchSpace};

pub type Landscape = oracle::FitnessLandscape<f64>;
pub type PathLeaderboard = search::Leaderboard<f64>;
pub type Supernet = supernet::SupernetState<f64>;
pub type SupernetTraining = supernet::TrainingRun<f64>;
pub type Task = supernet::ToyTask<f64>;
