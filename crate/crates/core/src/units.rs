//! Unit conventions.
//!
//! Every energy is stored as an ordinary frequency `E/h` in GHz, every time in
//! ns. A Hamiltonian `H` (GHz) evolves as `exp(-i 2π H t)`.

use std::f64::consts::PI;

pub const TWO_PI: f64 = 2.0 * PI;

/// Phase accumulated by frequency `f_ghz` over `t_ns`.
#[inline]
pub fn phase(f_ghz: f64, t_ns: f64) -> f64 {
    TWO_PI * f_ghz * t_ns
}

#[inline]
pub fn mhz_to_ghz(x: f64) -> f64 {
    x * 1e-3
}

#[inline]
pub fn ghz_to_mhz(x: f64) -> f64 {
    x * 1e3
}

#[inline]
pub fn ghz_to_khz(x: f64) -> f64 {
    x * 1e6
}
