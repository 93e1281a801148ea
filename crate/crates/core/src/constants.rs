//! Physical constants (CODATA 2018 exact values) and unit conversions.
//!
//! Internally every frequency is an angular frequency in rad/ns and every time
//! is in ns, so `omega * t` is a phase in radians with no further scaling.

use std::f64::consts::TAU;

/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Reduced flux quantum ħ/2e, Wb.
pub const REDUCED_FLUX_QUANTUM: f64 = HBAR / (2.0 * ELEMENTARY_CHARGE);

/// Femtofarad in farads.
pub const FEMTOFARAD: f64 = 1e-15;

/// Angular frequency (rad/ns) from an ordinary frequency in GHz.
pub fn ghz_to_angular(f_ghz: f64) -> f64 {
    TAU * f_ghz
}

/// Ordinary frequency in GHz from an angular frequency in rad/ns.
pub fn angular_to_ghz(omega: f64) -> f64 {
    omega / TAU
}

pub fn angular_to_mhz(omega: f64) -> f64 {
    angular_to_ghz(omega) * 1e3
}

pub fn angular_to_khz(omega: f64) -> f64 {
    angular_to_ghz(omega) * 1e6
}

/// rad/s to rad/ns.
pub fn per_second_to_per_ns(omega: f64) -> f64 {
    omega * 1e-9
}

/// Critical current in nA of a junction with Josephson angular frequency
/// `omega_j` (rad/ns), using ħω_J = φ₀ I_c.
pub fn critical_current_na(omega_j: f64) -> f64 {
    HBAR * omega_j * 1e9 / REDUCED_FLUX_QUANTUM * 1e9
}
