use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::GAMMA;
use crate::ellipse::{estimate_phase, FitOptions};
use crate::error::{Error, Result};
use crate::spinsim::Shot;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComagnetometerResult {
    /// Interrogation time, s.
    pub t: f64,
    /// Signed, unwrapped relative phase, rad.
    pub dphi: f64,
    pub dphi_sigma: f64,
    /// |B(r1)| − |B(r2)|, tesla.
    pub delta_b: f64,
    pub delta_b_sigma: f64,
}

/// Field difference between the two clouds from a single ellipse at fixed T.
///
/// The phase is reconstructed as `sign · |Δφ| + 2π · cycles`, with the cycle
/// count known from a prior sweep.
pub fn comagnetometer_diff(
    shots: &[Shot],
    sign: f64,
    cycles: i64,
    fit: &FitOptions,
    n_resamples: usize,
    seed: u64,
) -> Result<ComagnetometerResult> {
    let t = shots
        .first()
        .map(|s| s.t)
        .ok_or(Error::TooFewPoints { needed: 6, got: 0 })?;
    if shots.iter().any(|s| s.t != t) {
        return Err(Error::invalid(
            "co-magnetometer shots must share one interrogation time",
        ));
    }
    if !(t > 0.0) {
        return Err(Error::ZeroDenominator("interrogation time"));
    }
    let pts: Vec<(f64, f64)> = shots.iter().map(|s| (s.fz[0], s.fz[1])).collect();
    let est = estimate_phase(&pts, fit, n_resamples, seed)?;
    let s = if sign < 0.0 { -1.0 } else { 1.0 };
    let dphi = s * est.abs_dphi + 2.0 * PI * cycles as f64;
    Ok(ComagnetometerResult {
        t,
        dphi,
        dphi_sigma: est.sigma,
        delta_b: dphi / (GAMMA * t),
        delta_b_sigma: est.sigma / (GAMMA * t),
    })
}
