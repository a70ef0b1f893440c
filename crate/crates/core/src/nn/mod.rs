//! Minimal neural network kernels: tensors, layer forward/backward passes,
//! softmax cross-entropy, Adadelta and gradient verification.

pub mod activation;
pub mod adadelta;
pub mod batchnorm;
pub mod conv;
pub mod dense;
pub mod dropout;
pub mod gradcheck;
pub mod loss;
pub mod pool;
pub mod tensor;

pub use activation::{relu, relu_backward};
pub use adadelta::AdadeltaState;
pub use batchnorm::{BatchNormCache, BatchNormGrads, BatchNormState, BatchStats};
pub use conv::{conv2d_backward, conv2d_backward_params, conv2d_forward, ConvGrads, Padding};
pub use dense::{concat, dense_backward, dense_forward, split_columns, DenseGrads};
pub use dropout::{dropout, dropout_backward, Mode};
pub use gradcheck::{grad_check, GradCheck};
pub use loss::{softmax, softmax_ce, SoftmaxCe};
pub use pool::{maxpool2, maxpool2_backward, Pooled};
pub use tensor::{Scalar, Tensor};
