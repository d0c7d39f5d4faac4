//! Directional derivatives along two in-plane baselines → ∂/∂x and ∂/∂z.

use nalgebra::{Matrix2, Vector2, Vector3};

use crate::error::{Error, Result};

use super::gradient::GradientMeasurement;

/// Baselines closer to parallel than this cannot be inverted.
pub const MIN_FRAME_ANGLE_DEG: f64 = 5.0;

/// Angle of an in-plane direction measured from x̂ towards ẑ.
pub fn in_plane_angle(direction: &Vector3<f64>) -> Result<f64> {
    let norm = direction.norm();
    if !(norm > 0.0) || direction.y.abs() > 1e-6 * norm {
        return Err(Error::invalid(format!(
            "baseline direction {direction:?} is not in the horizontal x–z plane"
        )));
    }
    Ok(direction.z.atan2(direction.x))
}

/// Solves d_k = cos θ_k ∂B_j/∂x + sin θ_k ∂B_j/∂z for the two Cartesian
/// derivatives, propagating uncorrelated uncertainties to first order.
pub fn rotate_frame(
    first: &GradientMeasurement,
    second: &GradientMeasurement,
) -> Result<[GradientMeasurement; 2]> {
    if first.component != second.component {
        return Err(Error::invalid(
            "frame rotation needs two derivatives of the same field component",
        ));
    }
    let a = in_plane_angle(&first.direction)?;
    let b = in_plane_angle(&second.direction)?;
    let sep = (a - b).rem_euclid(std::f64::consts::PI);
    let sep = sep.min(std::f64::consts::PI - sep).to_degrees();
    if sep < MIN_FRAME_ANGLE_DEG {
        return Err(Error::SingularFrame { angle_deg: sep });
    }
    let m = Matrix2::new(a.cos(), a.sin(), b.cos(), b.sin());
    let inv = m
        .try_inverse()
        .ok_or(Error::SingularFrame { angle_deg: sep })?;
    let d = inv * Vector2::new(first.value, second.value);
    let sigma = |row: usize| (inv[(row, 0)] * first.sigma).hypot(inv[(row, 1)] * second.sigma);
    let make = |row: usize, direction: Vector3<f64>, frame: &str| GradientMeasurement {
        component: first.component,
        direction,
        baseline_frame: frame.to_string(),
        value: d[row],
        sigma: sigma(row),
        bias_sign: first.bias_sign,
    };
    Ok([make(0, Vector3::x(), "x"), make(1, Vector3::z(), "z")])
}
