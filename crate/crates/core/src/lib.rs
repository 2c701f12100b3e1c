//! Optimal finite-time control of a quasi-1D Bose-Einstein condensate.
//!
//! Protocols for the trap stiffness and the interaction strength are
//! designed on an overdamped Ornstein-Uhlenbeck analogue, mapped to the
//! condensate through the Gaussian-ansatz bridge relation, and checked
//! against direct Gross-Pitaevskii propagation. Strokes compose into
//! four-stroke engine cycles with work, efficiency and power accounting.
//!
//! All routines take a [`PhysicalParams`] and work in whatever consistent
//! units it is given in; the normalized system `hbar = m = omega0 = 1`
//! is the intended choice.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bridge;
pub mod engine;
pub mod error;
pub mod gpe;
pub mod numerics;
pub mod optimal;
pub mod par;
pub mod stochastic;
pub mod units;
pub mod variational;

pub use error::{Error, Result};
pub use par::Execution;
pub use units::{GaussianState, Knob, PhysicalParams, Protocol};
pub use variational::TrapConfig;
