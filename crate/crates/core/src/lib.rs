pub mod error;
pub mod gmres;
pub mod harness;
pub mod linalg;
pub mod lu;
pub mod matgen;
pub mod precision;
pub mod rng;

pub use error::{Error, Result};
