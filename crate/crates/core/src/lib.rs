//! Variance-optimal semi-static hedging of a variance swap with European
//! options in the Heston model.

pub mod claims;
pub mod error;
pub mod experiments;
pub mod fourier;
pub mod heston;
pub mod mc;
pub mod numfmt;
pub mod quadrature;
pub mod selection;
pub mod solver;

pub use error::{HedgeError, Result};
