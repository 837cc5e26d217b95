pub mod assembly;
pub mod error;
pub mod geometry;
pub mod kernel;
pub mod linalg;
pub mod postproc;
pub mod problem;
pub mod quadrature;
pub mod specfun;
pub mod study;

pub use error::{Error, Result};
