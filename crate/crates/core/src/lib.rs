//! Supervised feature extraction for collections of labeled pointclouds.
//!
//! A partial cover tree is grown over the pooled, weighted training points;
//! regions whose label entropy drops as the balls shrink become Gaussian
//! distributional coordinates, and a test cloud is classified by comparing
//! per-label norms of its coordinate vector.

pub mod classify;
pub mod cover_tree;
pub mod data;
pub mod entropy;
pub mod error;
pub mod gaussian;
pub mod io;
pub mod model;
pub mod select;
pub mod synth;

pub use classify::{cross_validate, predict, CvConfig, CvReport, Prediction};
pub use cover_tree::{CoverTree, CoverTreeConfig, RootPolicy};
pub use data::{CloudCollection, PointCloud, PooledPoints, WeightMode};
pub use error::{CderError, Result};
pub use model::{train, CderModel, TrainConfig};

