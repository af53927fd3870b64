//! Tri-modal (RGB, optical flow, audio) short-video emotion recognition.

pub mod audio;
pub mod error;
pub mod flow;
pub mod fusion;
pub mod io;
pub mod nets;
pub mod ops;
pub mod pipeline;
pub mod tensor;

pub use error::{Error, Result};
pub use fusion::{Emotion, FusionWeights, ScoreVector};
pub use tensor::Tensor;
