//! Numerics for quantum illumination with two light modes that each decohere
//! in a local Ohmic-family bath.
//!
//! The crate is `no_std` and only needs `alloc`. Everything is expressed in
//! natural units with the mode frequency `ω₀ = 1` and `ħ = k_B = 1`, so
//! frequencies are multiples of `ω₀` and times are multiples of `ω₀⁻¹`.
//!
//! * [`spectral`] describes the bath: spectral density, memory kernel,
//!   principal-value frequency shift, and the bound state of the
//!   single-excitation spectrum.
//! * [`dynamics`] computes the decoherence factor `u(t)` in the ideal,
//!   Born-Markov, exact (Volterra) and long-time asymptotic regimes, together
//!   with a discretized-bath reference integrator.
//! * [`gaussian`] holds two-mode Gaussian states and their fidelity.
//! * [`illumination`] turns `u(t)` into the resolution lower bound `F⁻(t)`.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod dynamics;
pub mod error;
pub mod gaussian;
pub mod illumination;
pub mod quad;
pub mod spectral;

pub mod linalg;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
