pub mod error;
pub mod fields;
pub mod hilbert_module;
pub mod kernels;
pub mod mapping;
pub mod measures;
pub mod numeric;
pub mod report;
pub mod simulate;
pub mod wold;

pub use error::{Error, Result};
pub use numeric::Tolerance;
