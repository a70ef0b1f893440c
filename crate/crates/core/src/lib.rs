//! Satellite patch classification with handcrafted texture features fused
//! into a small convolutional network.

pub mod cli;
pub mod colorspace;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod model;
pub mod nn;
pub mod ranking;

pub use error::{Error, Result};
