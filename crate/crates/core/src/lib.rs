pub mod biot_savart;
pub mod brownian;
pub mod checkpoint;
pub mod diagnostics;
pub mod engine;
pub mod error;
mod fft;
pub mod field;
pub mod oracle;

pub use error::{Error, Result};
