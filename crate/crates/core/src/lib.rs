//! Bratteli diagrams: heights, stochastic matrices, invariant-measure simplices,
//! ergodicity criteria and symbolic coding.

pub mod catalog;
pub mod diagram;
pub mod ergodicity;
pub mod error;
pub mod expr;
pub mod linalg;
pub mod poly;
pub mod series;
pub mod simplex;
pub mod spec;
pub mod subdiagram;
pub mod symbolic;
pub mod stationary;
pub mod toeplitz;

pub use diagram::BratteliDiagram;
pub use error::{Error, Result};
pub use linalg::{IntMatrix, Rat, RatMatrix};
pub use spec::{DiagramSpec, Generator};
