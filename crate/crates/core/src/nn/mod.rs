//! Dense network substrate with hand-written gradients.

pub mod activation;
pub mod adam;
pub mod checkpoint;
pub mod dense;
pub mod dropout;
pub mod gradcheck;
pub mod params;
pub mod rng;

pub use activation::{relu, sigmoid, PROB_EPS};
pub use adam::{AdamConfig, AdamState};
pub use checkpoint::Checkpoint;
pub use dense::{DenseLayer, SparseRow};
pub use dropout::{dropout, dropout_mask};
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use params::{ParamSet, TensorList, TensorMut, TensorRef};
pub use rng::Rng;
