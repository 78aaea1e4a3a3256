//! Elastic shape analysis of closed surfaces parameterized over the sphere.

pub mod baseline;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod registration;
pub mod regression;
pub mod srnf;
pub mod statistics;
pub mod synthetic;

pub use error::{Result, ShapeError};
