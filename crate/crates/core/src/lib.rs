//! Quasi-local energy-momentum of closed 2-surfaces with a hyperbolic reference.
//!
//! The pipeline embeds the surface metric into the hyperboloid model of H³,
//! builds the equidistant foliation outside the image, solves the lapse flow
//! and the backward transport flow on that foliation, and integrates the mass
//! functional.

pub mod embedding;
pub mod error;
pub mod flows;
pub mod foliation;
pub mod grid;
pub mod io;
pub mod laplacian;
pub mod linalg;
pub mod mass;
pub mod minkowski;
pub mod pipeline;
pub mod spinor;
pub mod surface;

pub use error::{Error, Result};
