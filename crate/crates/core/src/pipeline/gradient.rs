use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::constants::GAMMA;
use crate::error::{Error, Result};

use super::sweep::Baseline;
use super::unwrap::UnwrappedPoint;

/// One measured tensor component ∂B_j/∂x_i along a baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientMeasurement {
    /// Field component j (0 = x, 1 = y, 2 = z).
    pub component: usize,
    /// Unit baseline direction x_i.
    pub direction: Vector3<f64>,
    /// Frame label of the baseline ("x'", "z'", "x", "z", ...).
    pub baseline_frame: String,
    /// T/m.
    pub value: f64,
    /// T/m.
    pub sigma: f64,
    pub bias_sign: f64,
}

/// Polynomial fit of Δφ(T) with optional cubic term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub intercept: f64,
    /// rad/s.
    pub slope: f64,
    pub slope_sigma: f64,
    /// Coefficient of T³ when the cubic basis was used, rad/s³.
    pub cubic: Option<f64>,
    pub cubic_sigma: Option<f64>,
    /// Reduced χ² of the linear-only fit.
    pub linear_chi2_dof: f64,
    /// Largest standardised residual of the linear-only fit.
    pub max_linear_residual: f64,
    /// |slope(linear only) − slope(with cubic)| when the cubic term was used.
    pub linearity_systematic: f64,
}

struct PolyFit {
    coef: DVector<f64>,
    cov: DMatrix<f64>,
    residuals: Vec<f64>,
    chi2: f64,
}

fn weighted_poly_fit(
    points: &[UnwrappedPoint],
    powers: &[i32],
    weights: &[f64],
) -> Result<PolyFit> {
    let n = points.len();
    let m = powers.len();
    let design = DMatrix::from_fn(n, m, |i, j| points[i].t.powi(powers[j]));
    let w = DVector::from_column_slice(weights);
    let mut ata = DMatrix::zeros(m, m);
    let mut atb = DVector::zeros(m);
    for i in 0..n {
        let row = design.row(i);
        ata += w[i] * row.transpose() * row;
        atb += w[i] * points[i].dphi * row.transpose();
    }
    let inv = ata
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::invalid("interrogation times do not determine the fit"))?;
    let coef = &inv * atb;
    let residuals: Vec<f64> = (0..n)
        .map(|i| points[i].dphi - (design.row(i) * &coef)[0])
        .collect();
    let chi2 = residuals.iter().zip(weights).map(|(r, w)| w * r * r).sum();
    Ok(PolyFit {
        coef,
        cov: inv,
        residuals,
        chi2,
    })
}

/// Without per-point σ, the cubic term is kept when it lowers the residual sum
/// of squares by more than 9× the per-point scatter left after it (a 3σ F-test).
fn cubic_improves_unweighted(
    points: &[UnwrappedPoint],
    lin: &PolyFit,
    weights: &[f64],
) -> Result<bool> {
    let scale: f64 = points.iter().map(|p| p.dphi * p.dphi).sum();
    if !(lin.chi2 > 1e-24 * scale) {
        return Ok(false);
    }
    let cub = weighted_poly_fit(points, &[0, 1, 3], weights)?;
    let per_point = cub.chi2 / (points.len() - 3).max(1) as f64;
    Ok(lin.chi2 - cub.chi2 > 9.0 * per_point)
}

/// True when the T³ coefficient differs from zero by more than 3σ.
fn cubic_is_significant(points: &[UnwrappedPoint], weights: &[f64]) -> Result<bool> {
    let cub = weighted_poly_fit(points, &[0, 1, 3], weights)?;
    let dof = (points.len() - 3).max(1) as f64;
    let sigma = (cub.cov[(2, 2)] * (cub.chi2 / dof).max(1.0)).sqrt();
    Ok(cub.coef[2].abs() > 3.0 * sigma)
}

/// Weighted straight-line fit of Δφ(T), switching to a T + T³ basis when a
/// linear residual or the fitted T³ coefficient exceeds 3σ.
pub fn fit_line(points: &[UnwrappedPoint]) -> Result<LineFit> {
    let n = points.len();
    if n < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: n });
    }
    let have_sigmas = points.iter().all(|p| p.sigma > 0.0);
    let weights: Vec<f64> = if have_sigmas {
        points.iter().map(|p| 1.0 / (p.sigma * p.sigma)).collect()
    } else {
        vec![1.0; n]
    };

    let lin = weighted_poly_fit(points, &[0, 1], &weights)?;
    let dof = (n - 2).max(1) as f64;
    // Without per-point σ the scatter itself sets the scale.
    let scale = if have_sigmas {
        1.0
    } else {
        (lin.chi2 / dof).max(0.0)
    };
    let max_resid = if have_sigmas {
        lin.residuals
            .iter()
            .zip(&weights)
            .map(|(r, w)| (r * r * w).sqrt())
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    let chi2_dof = lin.chi2 / dof;
    let birge = |chi2_dof: f64| {
        if have_sigmas {
            chi2_dof.max(1.0)
        } else {
            scale
        }
    };

    let use_cubic = n >= 4
        && if have_sigmas {
            max_resid > 3.0 || cubic_is_significant(points, &weights)?
        } else {
            cubic_improves_unweighted(points, &lin, &weights)?
        };
    if !use_cubic {
        return Ok(LineFit {
            intercept: lin.coef[0],
            slope: lin.coef[1],
            slope_sigma: (lin.cov[(1, 1)] * birge(chi2_dof)).sqrt(),
            cubic: None,
            cubic_sigma: None,
            linear_chi2_dof: chi2_dof,
            max_linear_residual: max_resid,
            linearity_systematic: 0.0,
        });
    }

    let cub = weighted_poly_fit(points, &[0, 1, 3], &weights)?;
    let cdof = (n - 3).max(1) as f64;
    let b = if have_sigmas {
        (cub.chi2 / cdof).max(1.0)
    } else {
        cub.chi2 / cdof
    };
    let systematic = (lin.coef[1] - cub.coef[1]).abs();
    Ok(LineFit {
        intercept: cub.coef[0],
        slope: cub.coef[1],
        slope_sigma: (cub.cov[(1, 1)] * b).sqrt(),
        cubic: Some(cub.coef[2]),
        cubic_sigma: Some((cub.cov[(2, 2)] * b).sqrt()),
        linear_chi2_dof: chi2_dof,
        max_linear_residual: max_resid,
        linearity_systematic: systematic,
    })
}

/// Measured component together with the Δφ(T) fit that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientFit {
    pub measurement: GradientMeasurement,
    pub line: LineFit,
}

/// ∂B_j/∂x_i = sign(B_j) · (dΔφ/dT) / (γ Δx_i).
///
/// The reported σ adds the slope's statistical σ and, when the cubic basis was
/// needed, the shift in slope it caused.
pub fn fit_gradient(
    unwrapped: &[UnwrappedPoint],
    baseline: &Baseline,
    component: usize,
    bias_sign: f64,
) -> Result<GradientFit> {
    if !(baseline.separation > 0.0) {
        return Err(Error::invalid("baseline separation must be positive"));
    }
    if component > 2 {
        return Err(Error::invalid(format!("no field component {component}")));
    }
    let line = fit_line(unwrapped)?;
    let sign = if bias_sign < 0.0 { -1.0 } else { 1.0 };
    let k = 1.0 / (GAMMA * baseline.separation);
    Ok(GradientFit {
        measurement: GradientMeasurement {
            component,
            direction: baseline.axis,
            baseline_frame: baseline.frame.clone(),
            value: sign * line.slope * k,
            sigma: k * line.slope_sigma.hypot(line.linearity_systematic),
            bias_sign: sign,
        },
        line,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{MICROMETER, NT_PER_MM};
    use std::f64::consts::PI;

    fn baseline(separation: f64) -> Baseline {
        Baseline {
            axis: Vector3::z(),
            separation,
            frame: "z'".into(),
            midpoint: Vector3::zeros(),
        }
    }

    #[test]
    fn reference_slope_converts_to_gradient() {
        let slope = 2.0 * PI * 0.3133e3;
        let pts: Vec<_> = (1..=14)
            .map(|k| {
                let t = 0.2e-3 * k as f64;
                UnwrappedPoint {
                    t,
                    dphi: slope * t,
                    sigma: 0.0,
                }
            })
            .collect();
        let fit = fit_gradient(&pts, &baseline(840.0 * MICROMETER), 1, -1.0).unwrap();
        let g = fit.measurement.value;
        assert!((g / NT_PER_MM + 53.3).abs() < 0.05, "{}", g / NT_PER_MM);
        assert!(fit.measurement.sigma < 1e-12);
    }

    #[test]
    fn zero_slope() {
        let pts: Vec<_> = (1..=5)
            .map(|k| UnwrappedPoint {
                t: k as f64 * 1e-3,
                dphi: 0.0,
                sigma: 0.01,
            })
            .collect();
        let fit = fit_gradient(&pts, &baseline(1e-3), 1, 1.0).unwrap();
        assert_eq!(fit.measurement.value, 0.0);
        assert!(fit.measurement.sigma > 0.0);
        assert!(fit.line.cubic.is_none());
    }

    #[test]
    fn cubic_basis_engages_on_curvature() {
        let pts: Vec<_> = (1..=15)
            .map(|k| {
                let t = 0.2e-3 * k as f64;
                UnwrappedPoint {
                    t,
                    dphi: 1000.0 * t - 5e6 * t.powi(3),
                    sigma: 1e-3,
                }
            })
            .collect();
        let fit = fit_line(&pts).unwrap();
        let cubic = fit.cubic.expect("cubic term");
        assert!((cubic + 5e6).abs() < 1e-6 * 5e6);
        assert!((fit.slope - 1000.0).abs() < 1e-6);
        assert!(fit.linearity_systematic > 0.0);
    }

    #[test]
    fn too_few_points() {
        let pts = [UnwrappedPoint {
            t: 1.0,
            dphi: 0.0,
            sigma: 0.0,
        }];
        assert!(fit_gradient(&pts, &baseline(1.0), 1, 1.0).is_err());
    }
}
