//! Dense feed-forward networks with exact backpropagation and Adam.

mod adam;
pub mod checkpoint;
mod matrix;
mod mlp;

pub use adam::AdamState;
pub use matrix::{axpy, dot, Matrix};
pub use mlp::{
    Activation, Activations, Backward, ForwardCache, Layer, LayerGrads, Merge, Mlp, MlpGrads, MlpShape,
};

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("forward cache does not belong to this network revision")]
    StaleCache,
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
