//! Simulation toolkit for direct entangling gates between dual-type
//! trapped-ion qubits.
//!
//! Two ¹³⁷Ba⁺ ions carry qubits encoded either in the S₁/₂ hyperfine clock
//! pair (the *S* type) or in a field-insensitive pair of the D₅/₂ manifold
//! (the *D* type). A single pair of Raman beams drives a bichromatic
//! Mølmer-Sørensen interaction on both types at once, coupling the spins to
//! the two transverse modes of the crystal.
//!
//! The crate is split along the physics:
//!
//! * [`quantum`]: dense operators and states on qubit ⊗ qubit ⊗ mode ⊗ mode.
//! * [`zeeman`]: hyperfine-Zeeman levels, qubit frequencies, sweet spots and
//!   spectator transitions.
//! * [`ms`]: normal modes, Lamb-Dicke factors, analytic phase-space
//!   trajectories, Rabi calibration and the unitary propagator.
//! * [`open_system`]: Lindblad integration with dephasing and heating, plus a
//!   classical SPAM channel.
//! * [`protocol`]: gate runs, parity scans, contrast fits, Bell fidelities and
//!   the error budget.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod constants;
pub mod error;
pub mod kv;
pub mod ms;
pub mod open_system;
pub mod protocol;
pub mod quantum;
pub mod zeeman;

mod sparse;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
