//! Continuous summation-by-parts discretizations on triangles.

pub mod error;
pub mod linalg;
pub mod ref1d;
pub mod tri_cubature;
pub mod tri_sbp;
pub mod lps;
pub mod mesh;
pub mod assembly;
pub mod advection;
pub mod euler;
pub mod study;

pub use error::{Error, Result};
