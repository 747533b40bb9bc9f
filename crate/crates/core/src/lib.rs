//! Moran processes, their replicator-diffusion limit and mixed-strategy dominance.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dominance;
pub mod drift;
pub mod error;
pub mod game;
pub mod imitation;
pub mod moran;
pub mod ode;
pub mod pde;
pub mod quadrature;
pub mod spectral;

pub use error::{Error, Result};
