//! Forward and reverse-mode implementations of every layer the network uses:
//! temporal convolution, temporal max pooling, temporal transposed
//! convolution, ReLU, and per-sample softmax cross-entropy.
//!
//! Gradients are hand-derived; every layer is checked against central finite
//! differences (see the `gradcheck` module and the per-layer tests).

mod activation;
mod conv;
mod loss;
mod pool;

pub use activation::{relu_backward, relu_forward, ReluCache};
pub use conv::{
    conv1d_backward, conv1d_forward, deconv1d_backward, deconv1d_forward, Conv1dCache,
    Conv1dParams, Deconv1dCache, Deconv1dParams,
};
pub use loss::{softmax_time, softmax_xent_backward, softmax_xent_forward};
pub use pool::{maxpool1d_backward, maxpool1d_forward, PoolCache};
