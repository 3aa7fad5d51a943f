pub mod dirichlet;
pub mod error;
pub mod grid;
pub mod nonlocal_apply;
pub mod quadrature;
pub mod regularity;
pub mod spectral_measure;
pub mod verification;
pub mod symbol_heat;

pub use error::{LabError, Result};
