//! Cuntz algebra representations, shift endomorphisms of B(H) and UHF
//! states, realized exactly on finite truncations of L²((Z_n)^∞, μ).

pub mod cli;
pub mod cuntz_rep;
pub mod endo;
pub mod error;
pub mod invariants;
pub mod states;
pub mod lattice;
pub mod linalg;

pub use error::{Error, Result};
pub use faer::c64;
