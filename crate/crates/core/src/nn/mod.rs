//! Minimal deterministic neural substrate shared by the histogram decoder,
//! the title CNN, and the MoE head: hand-chained layers with analytic
//! forward/backward, Adam, seeded initializers, and a finite-difference
//! gradient checker.

pub mod checkpoint;
pub mod gradcheck;
pub mod init;
pub mod layers;
pub mod loss;
pub mod optim;
pub mod tensor;

pub use gradcheck::gradient_check;
pub use layers::{
    conv1d_backward, conv1d_forward, dense_backward, dense_forward, dropout, dropout_backward,
    max_over_time_backward, max_over_time_forward, relu_backward, relu_forward, sigmoid,
    sigmoid_backward, sigmoid_forward, softmax_backward, softmax_forward, BatchNorm, Mode,
};
pub use loss::{bce_backward, bce_loss};
pub use optim::Adam;
pub use tensor::Tensor;
