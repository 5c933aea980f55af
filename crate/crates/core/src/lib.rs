//! Predictive video codec with a learned convolutional frame predictor,
//! classical baselines (frame difference and block motion compensation),
//! and the rate-distortion evaluation pipeline around them.

pub mod bitio;
pub mod data;
pub mod error;
pub mod nets;
pub mod predictor;
pub mod residual;
pub mod tensor;
pub mod util;
pub mod video;

pub use error::{Error, Result};
