//! Gradiometry orchestration: from interferometer sweeps to a completed
//! gradient tensor and its source bearing.

mod comag;
mod frame;
mod gradient;
mod sweep;
mod tensor;
mod unwrap;

pub use comag::{comagnetometer_diff, ComagnetometerResult};
pub use frame::{in_plane_angle, rotate_frame, MIN_FRAME_ANGLE_DEG};
pub use gradient::{fit_gradient, fit_line, GradientFit, GradientMeasurement, LineFit};
pub use sweep::{
    analyze_shots, expected_phase_slope, sign_hint_from_fringes, sweep, sweep_from_shots, Baseline,
    Bias, Scenario, SweepPoint, SweepResult,
};
pub use tensor::{
    complete_tensor, dipole_bearing, grad_nulling_advice, Bearing, BiasDirectionGradient,
    GradientTensor, InPlaneGradients, NullingAdvice, EIGEN_GAP_THRESHOLD,
};
pub use unwrap::{unwrap, PhasePoint, UnwrappedPoint};

use crate::error::Result;
use crate::spinsim::Shot;

/// Everything produced by one simulated sweep and its analysis.
#[derive(Debug, Clone)]
pub struct SweepRun {
    pub shots: Vec<Shot>,
    pub sweep: SweepResult,
    pub unwrapped: Vec<UnwrappedPoint>,
    pub fit: GradientFit,
}

/// Sequence points with an ellipse estimate, ready for unwrapping.
pub fn phase_series(result: &SweepResult) -> Vec<PhasePoint> {
    result
        .usable()
        .map(|(t, e)| PhasePoint {
            t,
            abs_dphi: e.abs_dphi,
            sigma: e.sigma,
        })
        .collect()
}

/// Simulates the scenario, fits every ellipse, unwraps and converts the slope
/// to the scenario's gradient component.
pub fn measure_gradient(scenario: &Scenario, seed: u64) -> Result<SweepRun> {
    let (result, shots) = sweep(scenario, seed)?;
    let unwrapped = unwrap(&phase_series(&result), result.sign_hint)?;
    let fit = fit_gradient(
        &unwrapped,
        &scenario.baseline,
        scenario.bias.component(),
        scenario.bias.sign(),
    )?;
    Ok(SweepRun {
        shots,
        sweep: result,
        unwrapped,
        fit,
    })
}
