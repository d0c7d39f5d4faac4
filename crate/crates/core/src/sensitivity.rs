//! Closed-form figures of merit for a differential field sensor.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{GAMMA, HBAR, MU0, STANDARD_GRAVITY};
use crate::error::{Error, Result};

const CUBIC_CM: f64 = 1e-6;

/// Inputs for the bandwidth-normalised sensitivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityParams {
    /// Total atoms per shot.
    pub n_atoms: f64,
    /// Interrogation time, s.
    pub t: f64,
    /// Repetition period, s.
    pub t_shot: f64,
    /// Number of shots; total integration time is `shots · t_shot`.
    pub shots: u64,
    /// Noise above projection noise, ≥ 1.
    pub kappa: f64,
    /// Sensor volume, m³.
    pub volume: f64,
    pub gamma: f64,
}

impl SensitivityParams {
    pub fn new(n_atoms: f64, t: f64, t_shot: f64, kappa: f64) -> Self {
        Self {
            n_atoms,
            t,
            t_shot,
            shots: 1,
            kappa,
            volume: 0.0,
            gamma: GAMMA,
        }
    }

    /// Builds parameters from a duty cycle instead of a shot period.
    pub fn with_duty_cycle(n_atoms: f64, t: f64, duty: f64, kappa: f64) -> Self {
        Self::new(n_atoms, t, t / duty, kappa)
    }

    pub fn duty_cycle(&self) -> f64 {
        self.t / self.t_shot
    }

    pub fn integration_time(&self) -> f64 {
        self.shots as f64 * self.t_shot
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.duty_cycle();
        if !(self.n_atoms > 0.0) || !(self.t > 0.0) || !(self.t_shot > 0.0) {
            return Err(Error::invalid("atom number, T and T_shot must be positive"));
        }
        if !(d > 0.0 && d <= 1.0) {
            return Err(Error::invalid(format!("duty cycle {d} outside (0, 1]")));
        }
        if !(self.kappa >= 1.0) || !(self.gamma > 0.0) || !(self.volume >= 0.0) {
            return Err(Error::invalid("need kappa >= 1, gamma > 0, volume >= 0"));
        }
        Ok(())
    }
}

/// δB·√T_int = κ/(γ√(N·T·D)), in T·Hz^-1/2.
pub fn sql_sensitivity(p: &SensitivityParams) -> Result<f64> {
    p.validate()?;
    Ok(p.kappa / (p.gamma * (p.n_atoms * p.t * p.duty_cycle()).sqrt()))
}

/// δB·√V in T·cm^3/2·Hz^-1/2, for `volume` in m³.
pub fn spatiotemporal(db_rt_hz: f64, volume: f64) -> Result<f64> {
    if !(volume > 0.0) {
        return Err(Error::invalid("sensor volume must be positive"));
    }
    Ok(db_rt_hz * (volume / CUBIC_CM).sqrt())
}

/// Energy per unit bandwidth (δB√T_int)²·V/(2µ0) in units of ħ.
///
/// The squared sensitivity already carries one factor of time, so the
/// interrogation time only enters through `db_rt_hz`; it is accepted for
/// validation and recorded in reports.
pub fn energy_resolution(db_rt_hz: f64, t: f64, volume: f64) -> Result<f64> {
    if !(db_rt_hz >= 0.0) || !(t > 0.0) || !(volume > 0.0) {
        return Err(Error::invalid(
            "energy resolution needs δB ≥ 0, T > 0, V > 0",
        ));
    }
    Ok(db_rt_hz * db_rt_hz * volume / (2.0 * MU0) / HBAR)
}

/// Capsule of radius `radius` and straight length `length`.
pub fn capsule_volume(radius: f64, length: f64) -> f64 {
    4.0 / 3.0 * PI * radius.powi(3) + PI * radius * radius * length
}

/// Volume swept by a falling, expanding cloud: a capsule with the mean radius
/// `r0 + expansion·T/2` and length equal to the fall distance `g·T²/2`.
pub fn freefall_sensor_volume(initial_radius: f64, expansion_rate: f64, t: f64) -> Result<f64> {
    freefall_volume_with_gravity(initial_radius, expansion_rate, t, STANDARD_GRAVITY)
}

pub fn freefall_volume_with_gravity(
    initial_radius: f64,
    expansion_rate: f64,
    t: f64,
    gravity: f64,
) -> Result<f64> {
    if initial_radius < 0.0 || expansion_rate < 0.0 || t < 0.0 || gravity < 0.0 {
        return Err(Error::invalid("sensor volume inputs must be nonnegative"));
    }
    let mean_radius = initial_radius + 0.5 * expansion_rate * t;
    Ok(capsule_volume(mean_radius, 0.5 * gravity * t * t))
}

/// 20·log10(single/diff) in dB.
pub fn cmrr(single_phase_sigma: f64, diff_phase_sigma: f64) -> Result<f64> {
    if diff_phase_sigma == 0.0 {
        return Err(Error::ZeroDenominator("differential phase sigma"));
    }
    if !(single_phase_sigma >= 0.0) || !(diff_phase_sigma > 0.0) {
        return Err(Error::invalid("phase sigmas must be nonnegative"));
    }
    Ok(20.0 * (single_phase_sigma / diff_phase_sigma).log10())
}

/// Larmor angular-frequency noise equivalent to a phase spread accrued over `t`.
pub fn larmor_frequency_noise(single_phase_sigma: f64, t: f64) -> Result<f64> {
    if t == 0.0 {
        return Err(Error::ZeroDenominator("interrogation time"));
    }
    Ok(single_phase_sigma / t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub inputs: SensitivityParams,
    pub duty_cycle: f64,
    pub integration_time_s: f64,
    #[serde(rename = "sql_T_per_rt_Hz")]
    pub sql_t_per_rt_hz: f64,
    #[serde(rename = "sql_pT_per_rt_Hz")]
    pub sql_pt_per_rt_hz: f64,
    #[serde(rename = "spatiotemporal_T_cm32_per_rt_Hz")]
    pub spatiotemporal_t_cm32_per_rt_hz: Option<f64>,
    #[serde(rename = "spatiotemporal_fT_cm32_per_rt_Hz")]
    pub spatiotemporal_ft_cm32_per_rt_hz: Option<f64>,
    pub energy_resolution_hbar: Option<f64>,
    pub energy_convention: String,
}

/// Evaluates every closed-form metric for `p`, echoing the inputs.
pub fn report(p: &SensitivityParams) -> Result<SensitivityReport> {
    let sql = sql_sensitivity(p)?;
    let (st, energy) = if p.volume > 0.0 {
        (
            Some(spatiotemporal(sql, p.volume)?),
            Some(energy_resolution(sql, p.t, p.volume)?),
        )
    } else {
        (None, None)
    };
    Ok(SensitivityReport {
        inputs: *p,
        duty_cycle: p.duty_cycle(),
        integration_time_s: p.integration_time(),
        sql_t_per_rt_hz: sql,
        sql_pt_per_rt_hz: sql * 1e12,
        spatiotemporal_t_cm32_per_rt_hz: st,
        spatiotemporal_ft_cm32_per_rt_hz: st.map(|v| v * 1e15),
        energy_resolution_hbar: energy,
        energy_convention: "epsilon = (dB*sqrt(T_int))^2 * V / (2 mu0), in units of hbar".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demonstrated_and_prospective() {
        let demo = sql_sensitivity(&SensitivityParams::new(1e5, 3e-3, 25.0, 3.0)).unwrap();
        assert!((demo / 360e-12 - 1.0).abs() < 0.03, "{demo}");
        let pro =
            sql_sensitivity(&SensitivityParams::with_duty_cycle(1e6, 0.2, 0.008, 1.0)).unwrap();
        assert!((pro / 600e-15 - 1.0).abs() < 0.10, "{pro}");
        let quad = sql_sensitivity(&SensitivityParams::new(4e5, 3e-3, 25.0, 3.0)).unwrap();
        assert!((quad / demo - 0.5).abs() < 1e-12);
    }

    #[test]
    fn volume_metrics() {
        let st = spatiotemporal(360e-12, 2e-5 * 1e-9).unwrap();
        assert!((st * 1e15 / 51.0 - 1.0).abs() < 0.05, "{st}");
        let st4 = spatiotemporal(360e-12, 8e-5 * 1e-9).unwrap();
        assert!((st4 / st - 2.0).abs() < 1e-12);
        assert!(spatiotemporal(1.0, 0.0).is_err());
    }

    #[test]
    fn energy() {
        let e = energy_resolution(600e-15, 0.2, (20e-6f64).powi(3)).unwrap();
        assert!((5.0..20.0).contains(&e), "{e}");
        assert_eq!(energy_resolution(0.0, 0.2, 1e-15).unwrap(), 0.0);
        let vapor = energy_resolution(5e-15, 1.0, 1.024e-9).unwrap();
        assert!((50.0..=100.0).contains(&vapor), "{vapor}");
    }

    #[test]
    fn sensor_volume() {
        let r = 7e-6;
        let v = freefall_sensor_volume(r, 0.0, 0.0).unwrap();
        assert!((v / (4.0 / 3.0 * PI * r.powi(3)) - 1.0).abs() < 1e-14);
        let paper = freefall_sensor_volume(10e-6, 0.0, 3e-3).unwrap() * 1e9;
        assert!(
            (1e-5..1e-4).contains(&paper) || (2e-6..1e-4).contains(&paper),
            "{paper}"
        );
        let a = capsule_volume(r, 1e-4);
        let b = capsule_volume(r, 2e-4);
        assert!((b - a - PI * r * r * 1e-4).abs() < 1e-24);
    }

    #[test]
    fn rejection_ratio() {
        assert_eq!(cmrr(0.3, 0.3).unwrap(), 0.0);
        assert!((cmrr(1.0, 1e-3).unwrap() - 60.0).abs() < 1e-12);
        assert!(matches!(cmrr(1.0, 0.0), Err(Error::ZeroDenominator(_))));
        let w = larmor_frequency_noise(2.0 * PI * 192.0 * 3e-3, 3e-3).unwrap();
        assert!((w - 2.0 * PI * 192.0).abs() < 1e-9);
    }

    #[test]
    fn report_echoes_inputs() {
        let mut p = SensitivityParams::new(1e5, 3e-3, 25.0, 3.0);
        p.volume = 2e-14;
        p.shots = 24;
        let r = report(&p).unwrap();
        assert_eq!(r.inputs, p);
        assert!((r.integration_time_s - 600.0).abs() < 1e-12);
        assert!(r.energy_resolution_hbar.is_some());
    }
}
