//! Desk-scale style-based GAN pipeline.

pub mod autodiff;
pub mod cli;
pub mod data;
pub mod metrics;
pub mod model;
pub mod tensor;
pub mod train;

pub use tensor::{Element, Tensor, TensorError};
