//! Differentiable kernels used by the network.
//!
//! Every kernel is a pure function of its inputs plus explicit state
//! objects, with a hand-derived backward counterpart. Gradients are checked
//! against central finite differences in the test suites (see
//! [`gradcheck`]).

pub mod activation;
pub mod batchnorm;
pub mod conv;
pub mod dropout;
pub mod gradcheck;
pub mod linear;
pub mod loss;
pub mod pool;

pub use activation::{relu_backward, relu_forward, sigmoid};
pub use batchnorm::{batchnorm_backward, batchnorm_forward, BatchNormCache, BatchNormState, BnMode};
pub use conv::{conv1d_backward, conv1d_forward, conv1d_output_len, ConvParams};
pub use dropout::{dropout_backward, dropout_forward, DropoutMask};
pub use gradcheck::{max_rel_error, numeric_gradient, GradCheckEntry, GradCheckReport};
pub use linear::{linear_backward, linear_forward, LinearParams};
pub use loss::{bce_with_logits_backward, bce_with_logits_loss};
pub use pool::{
    global_avg_pool, global_avg_pool_backward, maxpool1d_backward, maxpool1d_forward,
    maxpool1d_output_len, MaxPoolCache,
};
