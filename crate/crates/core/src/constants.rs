//! Physical constants and display-unit conversions. Everything internal is SI.

use std::f64::consts::PI;

/// Gyromagnetic ratio of the ⁸⁷Rb F=1 ground state, 2π × 6.996 kHz/µT, in rad s⁻¹ T⁻¹.
pub const GAMMA: f64 = 2.0 * PI * 6.996e9;

/// Vacuum permeability (CODATA 2018), H/m.
pub const MU0: f64 = 1.256_637_062_12e-6;

/// Reduced Planck constant (CODATA 2018), J s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Standard gravity, m/s².
pub const STANDARD_GRAVITY: f64 = 9.806_65;

pub const MICROTESLA: f64 = 1e-6;
pub const NANOTESLA: f64 = 1e-9;
/// 1 nT/mm expressed in T/m.
pub const NT_PER_MM: f64 = 1e-6;
pub const MICROMETER: f64 = 1e-6;
pub const MILLIMETER: f64 = 1e-3;
pub const MILLISECOND: f64 = 1e-3;
