//! Many-body eigenstate geometry toolkit: occupation-number bases, reduced
//! density matrices, Jacobians of the state-to-RDM map, and cokernel-based
//! eigenstate certification.

pub mod error;
pub mod fock;
pub mod io;
pub mod kernel;
pub mod moduli;
pub mod operators;
pub mod rdm;

pub use error::{Error, Result};

/// Library version embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
