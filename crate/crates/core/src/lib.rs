//! Classical simulation of block-encoded expectation-value estimation.

pub mod blockenc;
pub mod error;
pub mod estimate;
pub mod matfun;
pub mod oracle;
pub mod reduce;
pub mod rng;
pub mod simkern;
pub mod slep;
pub mod sparsemat;

pub use error::{Error, Result};
