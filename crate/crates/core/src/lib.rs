//! Simulation library for ultra-cold ⁸⁷Rb atoms in an optical lattice coupled
//! through the Zeeman interaction to an array of cooled magnetic micro-cantilevers.
//!
//! The crate is organised bottom-up:
//!
//! * [`physcore`]: SI constants, ⁸⁷Rb data and unit conversions.
//! * [`zeeman`]: Breit–Rabi energies and transition frequencies.
//! * [`magnetostatics`]: analytic fields of the tip / compensation magnets.
//! * [`trap`]: optical lattice, Casimir–Polder, gravity and Zeeman potentials.
//! * [`noise`]: force sensitivity, coupling strength and decoherence budget.
//! * [`dynamics`]: Hilbert spaces, Hamiltonians and Lindblad evolution.
//! * [`protocols`]: CNOT and cantilever–cantilever entanglement sequences.
//! * [`cli`]: configuration file handling and the `hybridsim` subcommands.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod magnetostatics;
pub mod noise;
pub mod output;
pub mod physcore;
pub mod protocols;
pub mod trap;
pub mod zeeman;

pub use error::{Error, Result};
