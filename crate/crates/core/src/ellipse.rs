//! Differential phase from parametric interferometer data by ellipse-specific
//! conic fitting.
//!
//! The direct fit minimises the algebraic residual Σ(aX² + bXY + cY² + dX + eY + f)²
//! subject to 4ac − b² = 1. The linear part (d, e, f) is eliminated through the
//! reduced scatter matrix, and the constrained 3×3 problem is turned into a
//! symmetric eigenproblem with exactly one positive eigenvalue.
//!
//! For X = cos θ, Y = cos(θ + Δφ) the fitted conic has b / (2√(ac)) = −cos Δφ
//! (with a, c > 0), so the magnitude of the relative phase is
//! |Δφ| = arccos(−b / (2√(ac))).

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::rng::rng_for;

pub const MIN_POINTS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Reject fits with |b / (2√(ac))| above this value.
    pub cos_limit: f64,
    /// Expected per-axis noise on X and Y; 0 disables the spread test.
    pub noise_floor: f64,
    /// Reject when the RMS spread along the minor axis is below this multiple of `noise_floor`.
    pub min_spread_factor: f64,
    /// Reject when the linear design block is worse conditioned than this.
    pub condition_limit: f64,
    /// Run the ellipse-guaranteed geometric refinement after the direct fit.
    pub refine: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            cos_limit: 1.0 - 1e-6,
            noise_floor: 0.0,
            min_spread_factor: 3.0,
            condition_limit: 1e12,
            refine: false,
        }
    }
}

impl FitOptions {
    pub fn with_noise_floor(mut self, noise_floor: f64) -> Self {
        self.noise_floor = noise_floor;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    Direct,
    DirectRefined,
}

/// Conic aX² + bXY + cY² + dX + eY + f = 0, unit Euclidean norm, a + c ≥ 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conic {
    pub coefficients: [f64; 6],
    pub is_ellipse: bool,
    /// Condition number of the linear design block of the normalised data.
    pub condition: f64,
    pub n_points: usize,
    pub method: FitMethod,
}

impl Conic {
    /// Builds a conic from raw coefficients, normalising scale and sign.
    pub fn from_coefficients(coefficients: [f64; 6]) -> Self {
        let norm = coefficients.iter().map(|x| x * x).sum::<f64>().sqrt();
        let sign = if coefficients[0] + coefficients[2] < 0.0 {
            -1.0
        } else {
            1.0
        };
        let coefficients = if norm > 0.0 {
            coefficients.map(|x| sign * x / norm)
        } else {
            coefficients
        };
        let [a, b, c, ..] = coefficients;
        Self {
            coefficients,
            is_ellipse: b * b - 4.0 * a * c < 0.0,
            condition: 1.0,
            n_points: 0,
            method: FitMethod::Direct,
        }
    }

    pub fn discriminant(&self) -> f64 {
        let [a, b, c, ..] = self.coefficients;
        b * b - 4.0 * a * c
    }

    /// −b / (2√(ac)), the cosine of the relative phase; `None` unless ac > 0.
    pub fn cos_dphi(&self) -> Option<f64> {
        let [a, b, c, ..] = self.coefficients;
        if a * c > 0.0 {
            Some(-b / (2.0 * (a * c).sqrt()))
        } else {
            None
        }
    }

    pub fn algebraic_residual(&self, x: f64, y: f64) -> f64 {
        let [a, b, c, d, e, f] = self.coefficients;
        a * x * x + b * x * y + c * y * y + d * x + e * y + f
    }

    pub fn center(&self) -> Option<Vector2<f64>> {
        let [a, b, c, d, e, _] = self.coefficients;
        Matrix2::new(2.0 * a, b, b, 2.0 * c)
            .try_inverse()
            .map(|inv| inv * Vector2::new(-d, -e))
    }

    /// Half-extents of the ellipse along X and Y (the fringe amplitudes).
    pub fn half_extents(&self) -> Option<(f64, f64)> {
        if !self.is_ellipse {
            return None;
        }
        let [a, b, c, ..] = self.coefficients;
        let center = self.center()?;
        let k = -self.algebraic_residual(center.x, center.y);
        let det = a * c - 0.25 * b * b;
        let wx = k * c / det;
        let wy = k * a / det;
        (wx > 0.0 && wy > 0.0).then(|| (wx.sqrt(), wy.sqrt()))
    }

    /// Maps the conic through X → sX + tx, Y → sY + ty.
    pub fn transformed(&self, scale: f64, shift: Vector2<f64>) -> Conic {
        // Substitute X = (X' − tx)/s into the original equation.
        let inv = 1.0 / scale;
        let m = (-shift.x * inv, -shift.y * inv);
        let [a, b, c, d, e, f] = self.coefficients;
        let (a2, b2, c2) = (a * inv * inv, b * inv * inv, c * inv * inv);
        let (d2, e2) = (d * inv, e * inv);
        let coefficients = [
            a2,
            b2,
            c2,
            2.0 * a * inv * m.0 + b * inv * m.1 + d2,
            2.0 * c * inv * m.1 + b * inv * m.0 + e2,
            a * m.0 * m.0 + b * m.0 * m.1 + c * m.1 * m.1 + d * m.0 + e * m.1 + f,
        ];
        let mut out = Conic::from_coefficients(coefficients);
        out.condition = self.condition;
        out.n_points = self.n_points;
        out.method = self.method;
        out
    }
}

/// Magnitude of the relative phase extracted from an ellipse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseEstimate {
    /// |Δφ| in [0, π].
    pub abs_dphi: f64,
    pub sigma: f64,
    pub n_points: usize,
    pub method: FitMethod,
    /// True when −b/(2√(ac)) fell outside [−1, 1] and was clamped.
    pub clamped: bool,
}

fn isotropic_normalisation(points: &[(f64, f64)]) -> Result<(Vector2<f64>, f64)> {
    let n = points.len() as f64;
    let mean = points
        .iter()
        .fold(Vector2::zeros(), |acc, &(x, y)| acc + Vector2::new(x, y))
        / n;
    let ms = points
        .iter()
        .map(|&(x, y)| (Vector2::new(x, y) - mean).norm_squared())
        .sum::<f64>()
        / n;
    let rms = ms.sqrt();
    if !(rms > 1e-300) || !rms.is_finite() {
        return Err(Error::DegenerateConic("points coincide".into()));
    }
    Ok((mean, 1.0 / rms))
}

/// RMS spread of the points along their minor principal axis.
pub fn minor_axis_spread(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mean = points
        .iter()
        .fold(Vector2::zeros(), |acc, &(x, y)| acc + Vector2::new(x, y))
        / n;
    let mut cov = Matrix2::zeros();
    for &(x, y) in points {
        let d = Vector2::new(x, y) - mean;
        cov += d * d.transpose();
    }
    cov /= n;
    let tr = cov.trace();
    let det = cov.determinant();
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    (0.5 * tr - disc).max(0.0).sqrt()
}

fn condition_number(m: &Matrix3<f64>) -> f64 {
    let e = symmetric_eigen(m);
    let max = e.values.amax();
    let min = e
        .values
        .iter()
        .fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Direct ellipse-specific least-squares fit.
pub fn fit_conic(points: &[(f64, f64)], options: &FitOptions) -> Result<Conic> {
    if points.len() < MIN_POINTS {
        return Err(Error::TooFewPoints {
            needed: MIN_POINTS,
            got: points.len(),
        });
    }
    let (mean, scale) = isotropic_normalisation(points)?;

    if options.noise_floor > 0.0 {
        let spread = minor_axis_spread(points);
        if spread < options.min_spread_factor * options.noise_floor {
            return Err(Error::DegenerateConic(format!(
                "minor-axis spread {spread:.3e} is below {} × noise floor {:.3e}",
                options.min_spread_factor, options.noise_floor
            )));
        }
    }

    let mut s1 = Matrix3::zeros();
    let mut s2 = Matrix3::zeros();
    let mut s3 = Matrix3::zeros();
    for &(x, y) in points {
        let x = (x - mean.x) * scale;
        let y = (y - mean.y) * scale;
        let quad = Vector3::new(x * x, x * y, y * y);
        let lin = Vector3::new(x, y, 1.0);
        s1 += quad * quad.transpose();
        s2 += quad * lin.transpose();
        s3 += lin * lin.transpose();
    }

    let condition = condition_number(&s3);
    if !(condition < options.condition_limit) {
        return Err(Error::DegenerateConic(format!(
            "design matrix condition {condition:.3e} exceeds {:.1e}",
            options.condition_limit
        )));
    }
    let s3_inv = s3
        .try_inverse()
        .ok_or_else(|| Error::DegenerateConic("collinear points".into()))?;
    let elim = -s3_inv * s2.transpose();
    let reduced = s1 + s2 * elim;
    let reduced = 0.5 * (reduced + reduced.transpose());

    // Substituting a = Q Λ^{-1/2} u turns min aᵀRa s.t. aᵀCa = 1 into a symmetric
    // eigenproblem whose single positive eigenvalue gives the ellipse.
    let constraint = Matrix3::new(0.0, 0.0, 2.0, 0.0, -1.0, 0.0, 2.0, 0.0, 0.0);
    let r = symmetric_eigen(&reduced);
    let lmax = r.values.amax();
    if !(lmax > 0.0) {
        return Err(Error::DegenerateConic("empty scatter matrix".into()));
    }
    let floor = lmax * 1e-18;
    let inv_sqrt = Matrix3::from_diagonal(&r.values.map(|l| 1.0 / l.max(floor).sqrt()));
    let w = r.vectors * inv_sqrt;
    let k = w.transpose() * constraint * w;
    let ke = symmetric_eigen(&k);
    let (best, &mu) = ke
        .values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("three eigenvalues");
    if !(mu > 0.0) {
        return Err(Error::DegenerateConic(
            "no ellipse-constrained solution".into(),
        ));
    }
    let quad = w * ke.vectors.column(best);
    let lin = elim * quad;

    let mut conic = Conic::from_coefficients([quad[0], quad[1], quad[2], lin[0], lin[1], lin[2]])
        .transformed(1.0 / scale, mean);
    conic.condition = condition;
    conic.n_points = points.len();

    if options.refine {
        conic = refine_geometric(points, &conic)?;
        conic.condition = condition;
    }

    if !conic.is_ellipse {
        return Err(Error::DegenerateConic(
            "fitted conic is not an ellipse".into(),
        ));
    }
    match conic.cos_dphi() {
        Some(cos) if cos.abs() <= options.cos_limit => Ok(conic),
        Some(cos) => Err(Error::DegenerateConic(format!(
            "collapsed ellipse: |cos Δφ| = {:.9}",
            cos.abs()
        ))),
        None => Err(Error::DegenerateConic("ac ≤ 0".into())),
    }
}

/// |Δφ| from the quadratic coefficients of an ellipse.
pub fn relative_phase(conic: &Conic) -> Result<PhaseEstimate> {
    if !conic.is_ellipse {
        return Err(Error::NotAnEllipse);
    }
    let cos = conic.cos_dphi().ok_or(Error::NotAnEllipse)?;
    let clamped = !(-1.0..=1.0).contains(&cos);
    Ok(PhaseEstimate {
        abs_dphi: cos.clamp(-1.0, 1.0).acos(),
        sigma: 0.0,
        n_points: conic.n_points,
        method: conic.method,
        clamped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub sigma: f64,
    pub n_used: usize,
    pub n_discarded: usize,
}

/// Bootstrap standard deviation of |Δφ|; degenerate resamples are discarded and counted.
pub fn phase_uncertainty(
    points: &[(f64, f64)],
    n_resamples: usize,
    seed: u64,
    options: &FitOptions,
) -> Result<BootstrapSummary> {
    relative_phase(&fit_conic(points, options)?)?;
    let n = points.len();
    let estimates: Vec<Option<f64>> = (0..n_resamples)
        .into_par_iter()
        .map(|k| {
            use rand::Rng;
            let mut rng = rng_for(seed, &[k as u64]);
            let sample: Vec<(f64, f64)> = (0..n).map(|_| points[rng.random_range(0..n)]).collect();
            fit_conic(&sample, options)
                .and_then(|c| relative_phase(&c))
                .map(|p| p.abs_dphi)
                .ok()
        })
        .collect();
    let used: Vec<f64> = estimates.iter().flatten().copied().collect();
    let n_discarded = n_resamples - used.len();
    if used.len() < 2 {
        return Err(Error::DegenerateConic(format!(
            "only {} of {n_resamples} bootstrap resamples were fittable",
            used.len()
        )));
    }
    let mean = used.iter().sum::<f64>() / used.len() as f64;
    let var = used.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (used.len() - 1) as f64;
    Ok(BootstrapSummary {
        sigma: var.sqrt(),
        n_used: used.len(),
        n_discarded,
    })
}

/// Fit, phase and bootstrap uncertainty in one call.
pub fn estimate_phase(
    points: &[(f64, f64)],
    options: &FitOptions,
    n_resamples: usize,
    seed: u64,
) -> Result<PhaseEstimate> {
    let conic = fit_conic(points, options)?;
    let mut estimate = relative_phase(&conic)?;
    if n_resamples > 1 {
        estimate.sigma = phase_uncertainty(points, n_resamples, seed, options)?.sigma;
    }
    Ok(estimate)
}

/// Least-squares sinusoid F(ϕ) = offset + contrast · cos(ϕ − phase).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub offset: f64,
    pub contrast: f64,
    pub phase: f64,
}

pub fn fit_phase_fringe(phis: &[f64], values: &[f64]) -> Result<FringeFit> {
    if phis.len() != values.len() {
        return Err(Error::invalid("fringe phases and values differ in length"));
    }
    if phis.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: phis.len(),
        });
    }
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for (&phi, &v) in phis.iter().zip(values) {
        let row = Vector3::new(1.0, phi.cos(), phi.sin());
        ata += row * row.transpose();
        atb += row * v;
    }
    let sol = ata
        .try_inverse()
        .ok_or_else(|| Error::invalid("fringe phases do not span a period"))?
        * atb;
    Ok(FringeFit {
        offset: sol[0],
        contrast: sol[1].hypot(sol[2]),
        phase: sol[2].atan2(sol[1]),
    })
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

// Ellipse-guaranteed refinement: Levenberg–Marquardt on the Sampson distance in
// the geometric parameterisation (centre, log semi-axes, angle), which can only
// represent ellipses.

#[derive(Debug, Clone, Copy)]
struct Geometric {
    p: [f64; 5],
}

impl Geometric {
    fn from_conic(conic: &Conic) -> Option<Self> {
        let [a, b, c, ..] = conic.coefficients;
        let center = conic.center()?;
        let k = -conic.algebraic_residual(center.x, center.y);
        let e = symmetric_eigen(&Matrix3::new(
            a,
            0.5 * b,
            0.0,
            0.5 * b,
            c,
            0.0,
            0.0,
            0.0,
            0.0,
        ));
        // Use the two eigenpairs of the 2×2 block (the third is the padding zero).
        let mut pairs: Vec<(f64, Vector2<f64>)> = (0..3)
            .map(|i| {
                (
                    e.values[i],
                    Vector2::new(e.vectors[(0, i)], e.vectors[(1, i)]),
                )
            })
            .filter(|(_, v)| v.norm() > 0.5)
            .collect();
        if pairs.len() != 2 {
            return None;
        }
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let (l1, v1) = pairs[0];
        let (l2, _) = pairs[1];
        if !(k / l1 > 0.0 && k / l2 > 0.0) {
            return None;
        }
        let major = (k / l1).sqrt();
        let minor = (k / l2).sqrt();
        Some(Self {
            p: [center.x, center.y, major.ln(), minor.ln(), v1.y.atan2(v1.x)],
        })
    }

    fn coefficients(&self) -> [f64; 6] {
        let [cx, cy, la, lb, theta] = self.p;
        let (s, c) = theta.sin_cos();
        let ia = (-2.0 * la).exp();
        let ib = (-2.0 * lb).exp();
        let a = c * c * ia + s * s * ib;
        let b = 2.0 * c * s * (ia - ib);
        let cc = s * s * ia + c * c * ib;
        let d = -2.0 * a * cx - b * cy;
        let e = -b * cx - 2.0 * cc * cy;
        let f = a * cx * cx + b * cx * cy + cc * cy * cy - 1.0;
        [a, b, cc, d, e, f]
    }

    fn residuals(&self, points: &[(f64, f64)]) -> Vec<f64> {
        let [a, b, c, d, e, f] = self.coefficients();
        points
            .iter()
            .map(|&(x, y)| {
                let val = a * x * x + b * x * y + c * y * y + d * x + e * y + f;
                let gx = 2.0 * a * x + b * y + d;
                let gy = b * x + 2.0 * c * y + e;
                val / (gx * gx + gy * gy).sqrt().max(1e-300)
            })
            .collect()
    }
}

fn refine_geometric(points: &[(f64, f64)], initial: &Conic) -> Result<Conic> {
    let mut g = Geometric::from_conic(initial)
        .ok_or_else(|| Error::DegenerateConic("cannot parameterise initial ellipse".into()))?;
    let cost = |g: &Geometric| g.residuals(points).iter().map(|r| r * r).sum::<f64>();
    let mut current = cost(&g);
    let mut lambda = 1e-3;
    for _ in 0..100 {
        let r0 = g.residuals(points);
        let mut jac = vec![[0.0; 5]; points.len()];
        for k in 0..5 {
            let h = 1e-7 * g.p[k].abs().max(1e-3);
            let mut gp = g;
            gp.p[k] += h;
            let rp = gp.residuals(points);
            for (i, row) in jac.iter_mut().enumerate() {
                row[k] = (rp[i] - r0[i]) / h;
            }
        }
        let mut jtj = nalgebra::SMatrix::<f64, 5, 5>::zeros();
        let mut jtr = nalgebra::SVector::<f64, 5>::zeros();
        for (row, &r) in jac.iter().zip(&r0) {
            let v = nalgebra::SVector::<f64, 5>::from_row_slice(row);
            jtj += v * v.transpose();
            jtr += v * r;
        }
        let mut improved = false;
        for _ in 0..10 {
            let mut damped = jtj;
            for k in 0..5 {
                damped[(k, k)] *= 1.0 + lambda;
            }
            let Some(step) = damped.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = g;
            for k in 0..5 {
                trial.p[k] += step[k];
            }
            let c = cost(&trial);
            if c < current {
                let rel = (current - c) / current.max(1e-300);
                g = trial;
                current = c;
                lambda = (lambda * 0.3).max(1e-12);
                improved = rel > 1e-14;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    let mut conic = Conic::from_coefficients(g.coefficients());
    conic.n_points = initial.n_points;
    conic.method = FitMethod::DirectRefined;
    Ok(conic)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ellipse_points(dphi: f64, n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                (t.cos(), (t + dphi).cos())
            })
            .collect()
    }

    #[test]
    fn circle() {
        let pts: Vec<_> = (0..12)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / 12.0;
                (t.cos(), t.sin())
            })
            .collect();
        let c = fit_conic(&pts, &FitOptions::default()).unwrap();
        let [a, b, cc, ..] = c.coefficients;
        assert!(b.abs() < 1e-12);
        assert!((a - cc).abs() < 1e-12);
        assert!(c.is_ellipse);
        let p = relative_phase(&c).unwrap();
        assert!((p.abs_dphi - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn synthetic_ellipse_round_trip() {
        let pts = ellipse_points(1.0, 24);
        let c = fit_conic(&pts, &FitOptions::default()).unwrap();
        for &(x, y) in &pts {
            assert!(c.algebraic_residual(x, y).abs() < 1e-12);
        }
        let p = relative_phase(&c).unwrap();
        assert!((p.abs_dphi - 1.0).abs() < 1e-9, "{}", p.abs_dphi);
    }

    #[test]
    fn collapsed_ellipse_is_degenerate() {
        let pts = ellipse_points(0.0, 24);
        assert!(matches!(
            fit_conic(&pts, &FitOptions::default()),
            Err(Error::DegenerateConic(_))
        ));
        let pts = ellipse_points(PI, 24);
        assert!(matches!(
            fit_conic(&pts, &FitOptions::default()),
            Err(Error::DegenerateConic(_))
        ));
    }

    #[test]
    fn too_few_points() {
        let pts = ellipse_points(1.0, 5);
        assert!(matches!(
            fit_conic(&pts, &FitOptions::default()),
            Err(Error::TooFewPoints { needed: 6, got: 5 })
        ));
    }

    #[test]
    fn relative_phase_boundaries() {
        // −b/(2√(ac)) = −1, i.e. b = 2√(ac): the X + Y = 0 line pair limit.
        let c = Conic {
            coefficients: [1.0, 2.0, 1.0, 0.0, 0.0, -1.0],
            is_ellipse: true,
            condition: 1.0,
            n_points: 0,
            method: FitMethod::Direct,
        };
        let p = relative_phase(&c).unwrap();
        assert!((p.abs_dphi - PI).abs() < 1e-15);
        assert!(!p.clamped);
        let hyperbola = Conic::from_coefficients([1.0, 3.0, 1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            relative_phase(&hyperbola),
            Err(Error::NotAnEllipse)
        ));
    }

    #[test]
    fn noiseless_bootstrap_is_tight() {
        let pts = ellipse_points(1.3, 24);
        let s = phase_uncertainty(&pts, 200, 3, &FitOptions::default()).unwrap();
        assert!(s.sigma < 1e-9);
    }

    #[test]
    fn anisotropic_amplitudes_and_offsets_do_not_change_phase() {
        let pts: Vec<_> = ellipse_points(2.2, 30)
            .into_iter()
            .map(|(x, y)| (0.8 * x + 0.1, 0.6 * y - 0.05))
            .collect();
        let p = relative_phase(&fit_conic(&pts, &FitOptions::default()).unwrap()).unwrap();
        assert!((p.abs_dphi - 2.2).abs() < 1e-9);
    }

    #[test]
    fn half_extents_are_fringe_amplitudes() {
        let pts: Vec<_> = ellipse_points(0.9, 24)
            .into_iter()
            .map(|(x, y)| (0.7 * x, 0.9 * y))
            .collect();
        let c = fit_conic(&pts, &FitOptions::default()).unwrap();
        let (wx, wy) = c.half_extents().unwrap();
        assert!((wx - 0.7).abs() < 1e-9 && (wy - 0.9).abs() < 1e-9);
    }

    #[test]
    fn refinement_keeps_exact_fits_exact() {
        let pts = ellipse_points(0.7, 24);
        let opts = FitOptions {
            refine: true,
            ..FitOptions::default()
        };
        let c = fit_conic(&pts, &opts).unwrap();
        assert_eq!(c.method, FitMethod::DirectRefined);
        let p = relative_phase(&c).unwrap();
        assert!((p.abs_dphi - 0.7).abs() < 1e-8);
    }

    #[test]
    fn noise_floor_rejects_thin_ellipses() {
        let pts = ellipse_points(0.02, 24);
        let opts = FitOptions::default().with_noise_floor(0.01);
        assert!(matches!(
            fit_conic(&pts, &opts),
            Err(Error::DegenerateConic(_))
        ));
        assert!(fit_conic(&ellipse_points(1.0, 24), &opts).is_ok());
    }

    #[test]
    fn fringe_fit_recovers_phase_and_contrast() {
        let phis: Vec<f64> = (0..24).map(|k| 2.0 * PI * k as f64 / 24.0).collect();
        let vals: Vec<f64> = phis.iter().map(|p| 0.1 + 0.8 * (p - 0.4).cos()).collect();
        let f = fit_phase_fringe(&phis, &vals).unwrap();
        assert!((f.contrast - 0.8).abs() < 1e-12);
        assert!((f.phase - 0.4).abs() < 1e-12);
        assert!((f.offset - 0.1).abs() < 1e-12);
    }

    #[test]
    fn wrap_angle_range() {
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-15);
        assert!((wrap_angle(2.0 * PI + 0.1) - 0.1).abs() < 1e-12);
    }
}
