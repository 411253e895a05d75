//! Moduli regularization for sparse recurrent networks.
//!
//! Hidden neurons are embedded in a manifold and each recurrent weight is
//! penalized by a function of the geodesic distance between its endpoints.
//! Combined with scheduled magnitude pruning, this yields sparse networks
//! whose connectivity follows the geometry of the embedding.

pub mod checkpoint;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod inhibitor;
pub mod pruning;
pub mod regularizer;
pub mod rnn;
pub mod tasks;
pub mod tensor_io;

pub use error::{Error, Result};
