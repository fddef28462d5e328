pub mod analysis;
pub mod corpus;
pub mod error;
pub mod model;
pub mod nn;
pub mod par;
pub mod retrieval;
pub mod synth;
pub mod train;

pub use error::{NashError, Result};
