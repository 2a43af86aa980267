//! Klein tunneling through tilted gate barriers in armchair graphene
//! nanoribbons.
//!
//! The ribbon is described by the 4×4 Dirac equation projected onto the
//! transverse subbands of an ideal armchair ribbon, discretized along the
//! ribbon axis with central differences. The resulting block-tridiagonal
//! system is solved with recursive Green functions to obtain transmission,
//! local density of states and conductance.
//!
//! Module map:
//! - [`ribbon`]: geometry, subband quantization, mode spaces.
//! - [`barrier`]: gate profile and its projection onto the subbands.
//! - [`rgf`]: lattice blocks, lead self-energies, recursive and dense solvers.
//! - [`device`]: ready-to-solve device with the split two-chain fast path.
//! - [`observables`]: transmission, LDOS, conductance, reference formulas.
//! - [`config`] / [`sweep`]: run configuration and CSV sweep driver.

pub mod barrier;
pub mod config;
pub mod device;
pub mod error;
pub mod observables;
pub mod rgf;
pub mod ribbon;
pub mod sweep;

pub use error::{Error, Result};
