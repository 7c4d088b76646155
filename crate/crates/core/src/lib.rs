pub mod autodiff;
pub mod error;
pub mod graph;
pub mod motif;

pub use error::{Error, Result};
pub mod loss;
pub mod model;
pub mod spectral;
pub mod pooling;
pub mod metrics;
pub mod data;
pub mod pipeline;
pub mod verify;
