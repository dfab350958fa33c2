//! Optimal linear response of SRB measures for Anosov maps of the 2-torus,
//! computed with a Fejér-mollified Fourier discretization of the transfer
//! operator.
//!
//! The pipeline: [`transfer::build_transfer_matrix`] →
//! [`transfer::leading_eigenpair`] (SRB density) →
//! [`transfer::build_resolvent`] → [`response::optimal_field`].

pub mod cli;
pub mod dual;
pub mod error;
pub mod linalg;
pub mod maps;
pub mod par;
pub mod response;
pub mod spectral;
pub mod transfer;
pub mod validate;

pub use error::{Error, Result};
pub use maps::{TorusMap, TorusMapSpec, TorusPoint};
pub use response::{ObjectiveSpec, OptimalField};
pub use spectral::{ModeIndex, SpectralConfig, SpectralField, VectorField};
pub use transfer::{SrbEstimate, TransferMatrix};
