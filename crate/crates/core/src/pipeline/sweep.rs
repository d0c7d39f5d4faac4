use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::GAMMA;
use crate::ellipse::{estimate_phase, fit_phase_fringe, wrap_angle, FitOptions, PhaseEstimate};
use crate::error::{Error, Result};
use crate::fieldmodel::{FieldScene, FieldSource};
use crate::rng::{derive_seed, rng_for};
use crate::spinsim::{CloudTrajectory, NoiseModel, RamseySetup, Shot};

/// Separation of the two clouds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    /// Unit vector from cloud 2 to cloud 1.
    pub axis: Vector3<f64>,
    /// |r1 − r2|, metres.
    pub separation: f64,
    /// Frame label of the axis, e.g. "x'", "z'", "x".
    pub frame: String,
    /// Initial midpoint of the clouds, metres.
    pub midpoint: Vector3<f64>,
}

impl Baseline {
    pub fn positions(&self) -> [Vector3<f64>; 2] {
        let half = 0.5 * self.separation * self.axis;
        [self.midpoint + half, self.midpoint - half]
    }
}

/// Bias field, added to the scene as a uniform source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bias {
    pub axis: Vector3<f64>,
    /// Tesla.
    pub magnitude: f64,
}

impl Bias {
    pub fn field(&self) -> Vector3<f64> {
        self.axis * self.magnitude
    }

    /// Index of the dominant field component.
    pub fn component(&self) -> usize {
        self.field().iamax()
    }

    pub fn sign(&self) -> f64 {
        self.field()[self.component()].signum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Ambient and applied sources, excluding the bias.
    pub scene: FieldScene,
    pub bias: Bias,
    pub baseline: Baseline,
    /// Interrogation times, s.
    pub t_list: Vec<f64>,
    /// Second-pulse azimuths, rad.
    pub phi_list: Vec<f64>,
    pub noise: NoiseModel,
    pub gravity: Vector3<f64>,
    /// Free fall between release and the first pulse, s.
    pub pre_pulse_delay: f64,
    /// Offset of the reference oscillator from γ|B(midpoint)|, rad/s.
    pub reference_detuning: f64,
    pub pulse_area_error: f64,
    pub fit: FitOptions,
    /// Bootstrap resamples per ellipse; 0 skips the bootstrap.
    pub n_resamples: usize,
    /// Explicit sign of Δφ; when `None` it is read from phase-domain fringes.
    pub sign_hint: Option<f64>,
}

impl Scenario {
    pub fn full_scene(&self) -> FieldScene {
        let mut scene = self.scene.clone();
        scene.push(FieldSource::uniform(self.bias.field()));
        scene
    }

    pub fn trajectories(&self) -> [CloudTrajectory; 2] {
        self.baseline
            .positions()
            .map(|r| CloudTrajectory::at_rest(r, self.gravity).advanced(self.pre_pulse_delay))
    }

    pub fn setup(&self) -> Result<RamseySetup> {
        let mut setup = RamseySetup::new(self.full_scene(), self.trajectories())?;
        setup.omega_ref += self.reference_detuning;
        setup.pulse_area_error = self.pulse_area_error;
        Ok(setup)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.baseline.separation > 0.0) {
            return Err(Error::config("baseline.separation_um", "must be positive"));
        }
        if (self.baseline.axis.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::config("baseline.axis", "must be a unit vector"));
        }
        if !(self.bias.magnitude > 0.0) {
            return Err(Error::config("bias.magnitude_uT", "must be positive"));
        }
        if self.t_list.iter().any(|&t| !(t >= 0.0)) {
            return Err(Error::config("sequence.T_ms", "times must be non-negative"));
        }
        self.noise.validate()
    }

    /// Number of shots over the (T, ϕ) grid.
    pub fn shot_count(&self) -> usize {
        self.t_list.len() * self.phi_list.len()
    }

    /// Runs every (T, ϕ) shot. Each shot draws from its own stream keyed by the
    /// grid indices, so results do not depend on scheduling.
    pub fn simulate(&self, seed: u64) -> Result<Vec<Shot>> {
        self.validate()?;
        let setup = self.setup()?;
        let per_t: Vec<Result<Vec<Shot>>> = self
            .t_list
            .par_iter()
            .enumerate()
            .map(|(ti, &t)| {
                let phases = setup.accrued_phases(t)?;
                Ok(self
                    .phi_list
                    .iter()
                    .enumerate()
                    .map(|(pi, &phi)| {
                        let mut rng = rng_for(seed, &[ti as u64, pi as u64]);
                        setup.shot_from_phases(t, phi, phases, &self.noise, &mut rng)
                    })
                    .collect())
            })
            .collect();
        let mut shots = Vec::with_capacity(self.shot_count());
        for block in per_t {
            shots.extend(block?);
        }
        Ok(shots)
    }
}

/// Ellipse result for one interrogation time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub t: f64,
    pub estimate: Option<PhaseEstimate>,
    /// Reason the ellipse was rejected, if it was.
    pub degenerate: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    /// Sign of Δφ from phase-domain fringes at the shortest T (or the scenario's hint).
    pub sign_hint: f64,
}

impl SweepResult {
    pub fn usable(&self) -> impl Iterator<Item = (f64, &PhaseEstimate)> {
        self.points
            .iter()
            .filter_map(|p| p.estimate.as_ref().map(|e| (p.t, e)))
    }
}

/// Sign of δ₁ − δ₂ from sinusoid fits to each interferometer's phase-domain fringe.
pub fn sign_hint_from_fringes(shots: &[Shot]) -> Result<f64> {
    let phis: Vec<f64> = shots.iter().map(|s| s.phi).collect();
    let f1: Vec<f64> = shots.iter().map(|s| s.fz[0]).collect();
    let f2: Vec<f64> = shots.iter().map(|s| s.fz[1]).collect();
    let a = fit_phase_fringe(&phis, &f1)?;
    let b = fit_phase_fringe(&phis, &f2)?;
    Ok(if wrap_angle(a.phase - b.phase) < 0.0 {
        -1.0
    } else {
        1.0
    })
}

/// Fits one ellipse per interrogation time from a set of shots.
pub fn analyze_shots(
    shots: &[Shot],
    fit: &FitOptions,
    n_resamples: usize,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    let mut times: Vec<f64> = shots.iter().map(|s| s.t).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
        .par_iter()
        .enumerate()
        .map(|(ti, &t)| {
            let pts: Vec<(f64, f64)> = shots
                .iter()
                .filter(|s| s.t == t)
                .map(|s| (s.fz[0], s.fz[1]))
                .collect();
            let boot_seed = derive_seed(seed, &[0xb007, ti as u64]);
            match estimate_phase(&pts, fit, n_resamples, boot_seed) {
                Ok(estimate) => Ok(SweepPoint {
                    t,
                    estimate: Some(estimate),
                    degenerate: None,
                }),
                Err(e @ (Error::DegenerateConic(_) | Error::NotAnEllipse)) => Ok(SweepPoint {
                    t,
                    estimate: None,
                    degenerate: Some(e.to_string()),
                }),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Simulates the scenario's (T, ϕ) grid and extracts |Δφ|(T).
pub fn sweep(scenario: &Scenario, seed: u64) -> Result<(SweepResult, Vec<Shot>)> {
    let mut distinct = scenario.t_list.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::config(
            "sequence.T_ms",
            "at least 3 distinct interrogation times",
        ));
    }
    if scenario.phi_list.len() < 6 {
        return Err(Error::config(
            "sequence.phi",
            "at least 6 pulse phases per ellipse",
        ));
    }
    let shots = scenario.simulate(seed)?;
    let result = sweep_from_shots(&shots, scenario, seed)?;
    Ok((result, shots))
}

pub fn sweep_from_shots(shots: &[Shot], scenario: &Scenario, seed: u64) -> Result<SweepResult> {
    let points = analyze_shots(shots, &scenario.fit, scenario.n_resamples, seed)?;
    let sign_hint = match scenario.sign_hint {
        Some(s) => s.signum(),
        None => {
            let t0 = points.iter().map(|p| p.t).find(|&t| t > 0.0).unwrap_or(0.0);
            let first: Vec<Shot> = shots.iter().filter(|s| s.t == t0).cloned().collect();
            sign_hint_from_fringes(&first)?
        }
    };
    Ok(SweepResult { points, sign_hint })
}

/// Expected |dΔφ/dT| for a gradient of |B| along the baseline.
pub fn expected_phase_slope(grad_along_baseline: f64, separation: f64) -> f64 {
    GAMMA * grad_along_baseline * separation
}
