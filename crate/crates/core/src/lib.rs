//! Exact Hamming-weight-subspace simulation of the quantum alternating
//! operator ansatz on Max-k Vertex Cover, with XY mixers, angle search
//! strategies and a reproducible experiment harness.

pub mod engine;
pub mod error;
pub mod experiments;
pub mod instances;
pub mod linalg;
pub mod operators;
pub mod optimize;
pub mod rng;
pub mod stats;
pub mod subspace;

pub use error::{QaoaError, Result};
