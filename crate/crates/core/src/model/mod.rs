//! Encoder → Bernoulli code → (noise) → softmax decoder, with an optional
//! classifier head, trained with the straight-through estimator.

pub mod code;
pub mod forward;
pub mod ops;
pub mod params;

pub use code::{binarize_deterministic, binarize_stochastic, HashCode};
pub use forward::{
    backward, batch_loss, encode, encode_probs_batch, forward, loss_and_grads, Binarization, Draws,
    EncoderTrace, ForwardTrace, LossReport, NoiseMode, Objective,
};
pub use ops::{
    classify_logprob, decode_logprob, encode_code, encode_probs, inject_noise, kl_bernoulli,
    map_rate, rate_distortion_report, RateDistortion,
};
pub use params::{Architecture, NashParams};
