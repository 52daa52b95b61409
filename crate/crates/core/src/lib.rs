//! Dressed-state potentials, coupled-channel scattering and vibrational
//! spectra for a pair of atoms sharing one photon with a cavity mode.
//!
//! All physics works in angular-frequency energy units (rad/s) and lengths
//! in Bohr radii; conversions live in [`units`].

#![no_std]
// `!(x > 0.0)` is the NaN-rejecting form; index loops mirror matrix notation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod adiabatic;
pub mod boundstates;
pub mod error;
pub mod grid;
pub mod nonadiabatic;
pub mod numerics;
pub mod params;
pub mod resonance;
pub mod scattering;
pub mod spectrum;
pub mod units;

pub use error::{Error, Result};
pub use grid::RadialGrid;
pub use params::{Preset, SystemParams};

pub type C64 = num_complex::Complex64;
