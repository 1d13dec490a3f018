//! Simulation and design tools for quantum non-demolition (QND) photon-number
//! measurement.
//!
//! The crate contrasts two families of system–probe interaction:
//!
//! * an *effective* coupling `g · n ⊗ P` that commutes with the photon number
//!   and therefore never disturbs the number distribution, and
//! * a *gauge-analog* Jaynes–Cummings coupling, linear in the field operators,
//!   that does not commute with the photon number.
//!
//! Modules, bottom-up:
//!
//! * [`hilbert`]: truncated Fock space, two-level probe, joint space, states
//!   and operators.
//! * [`dynamics`]: Hamiltonian builders and exact unitary evolution.
//! * [`qnd`]: strong (commutator) and generalized weak QND conditions, and the
//!   backaction metric.
//! * [`metrology`]: Monte-Carlo interferometric readout with sequential probe
//!   electrons.
//! * [`detector`]: analytic design model, response range, design optimizer
//!   and information entropy.

// `!(x <= tol)` style checks are intentional: NaN must fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detector;
pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod metrology;
pub mod qnd;
pub mod tolerance;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
