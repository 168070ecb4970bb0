//! Physical constants (CODATA 2018).

use std::f64::consts::PI;

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Atomic mass unit, kg.
pub const AMU: f64 = 1.660_539_066_60e-27;

/// Bohr magneton over Planck's constant, Hz/G.
pub const BOHR_MAGNETON_HZ_PER_GAUSS: f64 = 1.399_624_493_61e6;

/// Nuclear magneton over Bohr magneton.
pub const NUCLEAR_TO_BOHR: f64 = 1.0 / 1_836.152_673_43;

pub const TWO_PI: f64 = 2.0 * PI;

/// Converts an ordinary frequency in MHz to an angular frequency in rad/s.
pub fn mhz_to_angular(mhz: f64) -> f64 {
    TWO_PI * mhz * 1e6
}

/// Converts an angular frequency in rad/s to an ordinary frequency in Hz.
pub fn angular_to_hz(omega: f64) -> f64 {
    omega / TWO_PI
}
