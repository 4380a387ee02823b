//! Learning low-rank empirical Green's functions of self-adjoint operators
//! from excitation-response pairs, and carrying them across model parameters
//! by interpolation on the Grassmann manifold.

pub mod bundle;
pub mod egf;
pub mod error;
pub mod experiments;
pub mod forcing;
pub mod grid;
pub mod interp;
pub mod learn_pod;
pub mod learn_rsvd;
pub mod linalg;
pub mod rng;
pub mod solvers;

pub use error::{EgfError, Result};
pub use grid::{make_disk_grid, make_interval_grid, make_periodic_grid, make_square_grid, Domain, SensorGrid};
