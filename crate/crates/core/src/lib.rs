pub mod brand_value;
pub mod cli;
pub mod data;
pub mod error;
pub mod gibbs;
pub mod kernels;
pub mod posterior;
pub mod recovery;
pub mod synth;

pub use error::{Error, Result};
