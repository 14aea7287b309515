//! Majorization of finitely supported measures on nonpositively curved
//! spaces (Euclidean space, the Poincaré half-plane, SPD matrices with the
//! trace metric, and their products) and on the Wasserstein space of the
//! real line.
//!
//! The crate computes barycenters, verifies, synthesizes and (in Euclidean
//! space) decides the majorization relation, and fuzz-checks the convex
//! inequalities that majorization implies.

pub mod barycenter;
pub mod cli;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod inequalities;
mod json;
pub mod linalg;
pub mod lpcore;
pub mod sampling;
pub mod stochastic;
pub mod wasserstein;

pub use barycenter::{barycenter, BarycenterResult, DiscreteMeasure};
pub use error::{Error, Result};
pub use exec::Execution;
pub use geometry::{Point, Space, TangentVector};
pub use stochastic::{MajorizationCertificate, RowStochasticMatrix};
pub use wasserstein::DiscreteMeasure1D;
