//! Minimal neural computation core: tensors, named parameters, forward kernels,
//! tape-based reverse-mode gradients and Adam.

mod graph;
mod layers;
mod params;
mod tensor;

use thiserror::Error;

pub use graph::{Graph, NodeId, RowRef};
pub use layers::{
    conv1d_maxpool, conv1d_maxpool_masked, cross_entropy, dense, dense_softmax, embed_sequence, lstm_forward, softmax,
    ConvPoolOutput, LstmWeights, PROB_FLOOR,
};
pub use params::{adam_step, AdamConfig, AdamState, Gradients, ParameterSet};
pub use tensor::Tensor;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("sequence of length {len} is shorter than filter width {width}")]
    SequenceTooShort { len: usize, width: usize },
    #[error("unknown parameter `{0}`")]
    MissingParameter(String),
    #[error("backward called before a forward pass was recorded")]
    NoForward,
}
