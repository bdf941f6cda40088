//! Gaussian-process prediction for attributed simplicial 2-complexes.

pub mod cache;
pub mod complex;
pub mod datagen;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod gp;
pub mod hodge;
pub mod hodgelet;
pub mod quadrature;

pub use complex::{IncidenceMatrices, SimplicialComplex, ValidationReport};
pub use error::{Error, Result};
