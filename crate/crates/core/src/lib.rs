//! Disclosure risk from homogeneity attacks on frequency tables released
//! through the Laplace and Gaussian mechanisms.

pub mod error;
pub mod estimation;
pub mod mc_oracle;
pub mod mechanisms;
pub mod risk;
pub(crate) mod rng;
pub mod special;
pub mod synthetic;
pub mod tabulation;
pub mod utility;

pub use error::{Error, Result};
