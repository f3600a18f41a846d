//! Two-parameter (force magnitude and phase) displacement sensing with a driven
//! dissipative Rabi lattice close to its critical point.
//!
//! * [`params`]: couplings, reductions, critical structure
//! * [`analytic`]: closed-form Gaussian steady states
//! * [`metrology`]: QFIM, SLD, Cramér-Rao and SQL comparisons
//! * [`dynamics`]: Lyapunov moment-flow and Lindblad oracles
//! * [`exec`]: data-parallel sweep execution (rayon, or sequential without the `parallel` feature)
//! * [`validation`]: the end-to-end consistency suite

pub mod analytic;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod fock;
pub mod metrology;
pub mod params;
pub mod validation;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
