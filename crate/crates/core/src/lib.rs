pub mod body;
pub mod error;
pub mod harness;
pub mod lpsolver;
pub mod measure;
pub mod polytope;
pub mod spectrum;
pub mod sphere;
pub mod stability;
pub mod suite;

pub use error::{Error, Result};
