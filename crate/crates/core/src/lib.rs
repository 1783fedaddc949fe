pub mod cli;
pub mod config;
pub mod control;
pub mod diffusion;
pub mod error;
pub mod evalkit;
pub mod freqbalance;
pub mod glyphdata;
pub mod nn;
pub mod pgm;
pub mod pipeline;
pub mod stager;
pub mod train;
pub mod tensor;
pub mod unet;

pub use error::{Error, Result};
