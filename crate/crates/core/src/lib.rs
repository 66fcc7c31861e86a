pub mod boundary_ops;
pub mod effective;
pub mod error;
pub mod geometry;
pub mod imaging;
pub mod media;
pub mod peak;
pub mod polarization;
pub mod special;

pub use error::{Error, Result};
