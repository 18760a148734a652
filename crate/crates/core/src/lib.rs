//! Text-centric multimodal fusion for HEXACO personality-trait regression.
//!
//! The crate consumes pre-extracted text, audio and video feature vectors
//! and provides the model, its training loop, dataset and checkpoint I/O,
//! and the prompt builder used upstream of the text encoder.

pub mod check;
pub mod data;
pub mod error;
pub mod hexaco;
pub mod nn;
pub mod prompt;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use hexaco::Trait;
