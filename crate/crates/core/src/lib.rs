//! C1 quadratic spline quasi-interpolants on non-uniform criss-cross
//! triangulations of a rectangle.

pub mod analysis;
pub mod basis;
pub mod bernstein;
pub mod config;
pub mod error;
pub mod functions;
pub mod mesh;
pub mod numeric;
pub mod operators;
pub mod polynomial;

pub use error::{QiError, Result};
