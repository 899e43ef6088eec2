pub mod certificate;
pub mod error;
pub mod lanczos;
pub mod partition;
pub mod perturbation;
pub mod potential;
pub mod scattering;
pub mod spectral;
pub mod tridiag;

pub use error::{Error, Result};
