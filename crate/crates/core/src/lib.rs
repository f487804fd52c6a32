//! Knowledge graph embedding with concepts as spheres and instances as points.
//!
//! The pipeline is: load or build a [`kg::KnowledgeGraph`], train an
//! [`geometry::EmbeddingSpace`] with [`training::train`], then evaluate it
//! with [`eval`] (link prediction and triple classification) or mine new isA
//! facts with [`inference`].

pub mod checkpoint;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod inference;
pub mod kg;
pub mod rng;
pub mod sampling;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};
