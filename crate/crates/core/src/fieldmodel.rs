//! Static magnetic field sources and their fields, gradient tensors and
//! gradients of the field magnitude.
//!
//! The gradient tensor convention is `G[(i, j)] = ∂B_i/∂x_j`.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::constants::MU0;
use crate::error::{Error, Result};

/// Minimum distance to a dipole or coil wire, in metres.
pub const SINGULAR_DISTANCE: f64 = 1e-9;
/// Step used for finite-difference gradients of coil fields, in metres.
pub const MIN_COIL_SEGMENTS: usize = 12;
pub const DEFAULT_COIL_SEGMENTS: usize = 360;
/// Below this magnitude the direction of B, and hence ∇|B|, is undefined.
pub const ZERO_FIELD: f64 = 1e-15;

const MAXWELL_TOLERANCE: f64 = 1e-12;

/// A single circular coil approximated by a regular polygon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoilLoop {
    pub center: Vector3<f64>,
    /// Unit normal; positive current circulates counter-clockwise about it.
    pub normal: Vector3<f64>,
    pub radius: f64,
    pub current: f64,
    pub n_segments: usize,
}

impl CoilLoop {
    pub fn new(
        center: Vector3<f64>,
        normal: Vector3<f64>,
        radius: f64,
        current: f64,
        n_segments: usize,
    ) -> Result<Self> {
        if n_segments < MIN_COIL_SEGMENTS {
            return Err(Error::invalid(format!(
                "coil needs at least {MIN_COIL_SEGMENTS} segments, got {n_segments}"
            )));
        }
        if !(radius > 0.0) {
            return Err(Error::invalid("coil radius must be positive"));
        }
        let norm = normal.norm();
        if !(norm > 0.0) {
            return Err(Error::invalid("coil normal must be non-zero"));
        }
        Ok(Self {
            center,
            normal: normal / norm,
            radius,
            current,
            n_segments,
        })
    }

    fn vertices(&self) -> Vec<Vector3<f64>> {
        let (u, v) = orthonormal_pair(&self.normal);
        (0..self.n_segments)
            .map(|k| {
                let phi = 2.0 * PI * k as f64 / self.n_segments as f64;
                self.center + self.radius * (phi.cos() * u + phi.sin() * v)
            })
            .collect()
    }

    fn field_at(&self, r: &Vector3<f64>) -> Result<Vector3<f64>> {
        let verts = self.vertices();
        let prefactor = MU0 * self.current / (4.0 * PI);
        let mut b = Vector3::zeros();
        for k in 0..verts.len() {
            let a = verts[k];
            let c = verts[(k + 1) % verts.len()];
            b += segment_field(&a, &c, r)?;
        }
        Ok(prefactor * b)
    }

    fn gradient_at(&self, r: &Vector3<f64>) -> Result<Matrix3<f64>> {
        let verts = self.vertices();
        let prefactor = MU0 * self.current / (4.0 * PI);
        let mut g = Matrix3::zeros();
        for k in 0..verts.len() {
            g += segment_gradient(&verts[k], &verts[(k + 1) % verts.len()], r)?;
        }
        Ok(prefactor * g)
    }
}

/// Two coaxial loops sharing a radius, separated along their common axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoilPair {
    pub first: CoilLoop,
    pub second: CoilLoop,
    /// True when the second loop carries the opposite current (anti-Helmholtz).
    pub opposed: bool,
}

impl CoilPair {
    /// Builds a pair centred on `center` with loops at ±separation/2 along `axis`.
    pub fn new(
        center: Vector3<f64>,
        axis: Vector3<f64>,
        radius: f64,
        separation: f64,
        current: f64,
        opposed: bool,
        n_segments: usize,
    ) -> Result<Self> {
        let norm = axis.norm();
        if !(norm > 0.0) {
            return Err(Error::invalid("coil pair axis must be non-zero"));
        }
        let axis = axis / norm;
        let offset = 0.5 * separation * axis;
        let second_current = if opposed { -current } else { current };
        Ok(Self {
            first: CoilLoop::new(center + offset, axis, radius, current, n_segments)?,
            second: CoilLoop::new(center - offset, axis, radius, second_current, n_segments)?,
            opposed,
        })
    }

    /// Helmholtz spacing (separation equal to radius).
    pub fn helmholtz(
        center: Vector3<f64>,
        axis: Vector3<f64>,
        radius: f64,
        current: f64,
        opposed: bool,
    ) -> Result<Self> {
        Self::new(
            center,
            axis,
            radius,
            radius,
            current,
            opposed,
            DEFAULT_COIL_SEGMENTS,
        )
    }
}

/// A composable static field source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSource {
    Uniform {
        field: Vector3<f64>,
    },
    /// B(r) = field + gradient · (r − origin).
    LinearGradient {
        field: Vector3<f64>,
        gradient: Matrix3<f64>,
        origin: Vector3<f64>,
        maxwell_valid: bool,
    },
    Dipole {
        moment: Vector3<f64>,
        position: Vector3<f64>,
    },
    CoilLoop(CoilLoop),
    CoilPair(CoilPair),
}

impl FieldSource {
    pub fn uniform(field: Vector3<f64>) -> Self {
        FieldSource::Uniform { field }
    }

    /// A linear-gradient source that must satisfy ∇·B = 0 and ∇×B = 0.
    pub fn linear_gradient(
        field: Vector3<f64>,
        gradient: Matrix3<f64>,
        origin: Vector3<f64>,
    ) -> Result<Self> {
        let scale = gradient.norm();
        let trace = gradient.trace().abs();
        let asym = (gradient - gradient.transpose()).norm();
        if scale > 0.0 && (trace > MAXWELL_TOLERANCE * scale || asym > MAXWELL_TOLERANCE * scale) {
            return Err(Error::invalid(format!(
                "gradient is not Maxwellian: |trace| = {trace:.3e}, ‖G − Gᵀ‖ = {asym:.3e}"
            )));
        }
        Ok(FieldSource::LinearGradient {
            field,
            gradient,
            origin,
            maxwell_valid: true,
        })
    }

    /// A linear-gradient source with no Maxwell check, for exercising consistency diagnostics.
    pub fn unchecked_linear_gradient(
        field: Vector3<f64>,
        gradient: Matrix3<f64>,
        origin: Vector3<f64>,
    ) -> Self {
        FieldSource::LinearGradient {
            field,
            gradient,
            origin,
            maxwell_valid: false,
        }
    }

    pub fn dipole(moment: Vector3<f64>, position: Vector3<f64>) -> Self {
        FieldSource::Dipole { moment, position }
    }

    pub fn is_maxwell_valid(&self) -> bool {
        match self {
            FieldSource::LinearGradient { maxwell_valid, .. } => *maxwell_valid,
            _ => true,
        }
    }

    pub fn field_at(&self, r: &Vector3<f64>) -> Result<Vector3<f64>> {
        match self {
            FieldSource::Uniform { field } => Ok(*field),
            FieldSource::LinearGradient {
                field,
                gradient,
                origin,
                ..
            } => Ok(field + gradient * (r - origin)),
            FieldSource::Dipole { moment, position } => dipole_field(moment, &(r - position)),
            FieldSource::CoilLoop(coil) => coil.field_at(r),
            FieldSource::CoilPair(pair) => Ok(pair.first.field_at(r)? + pair.second.field_at(r)?),
        }
    }

    pub fn gradient_at(&self, r: &Vector3<f64>) -> Result<Matrix3<f64>> {
        match self {
            FieldSource::Uniform { .. } => Ok(Matrix3::zeros()),
            FieldSource::LinearGradient { gradient, .. } => Ok(*gradient),
            FieldSource::Dipole { moment, position } => dipole_gradient(moment, &(r - position)),
            FieldSource::CoilLoop(coil) => coil.gradient_at(r),
            FieldSource::CoilPair(pair) => {
                Ok(pair.first.gradient_at(r)? + pair.second.gradient_at(r)?)
            }
        }
    }
}

/// A set of sources plus the scale of spatially uniform shot-to-shot field noise.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldScene {
    pub sources: Vec<FieldSource>,
    /// Standard deviation of the common-mode field-magnitude noise, tesla.
    pub common_noise: f64,
}

impl FieldScene {
    pub fn new(sources: Vec<FieldSource>) -> Self {
        Self {
            sources,
            common_noise: 0.0,
        }
    }

    pub fn with_common_noise(mut self, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) {
            return Err(Error::invalid("common-mode noise must be non-negative"));
        }
        self.common_noise = sigma;
        Ok(self)
    }

    pub fn push(&mut self, source: FieldSource) {
        self.sources.push(source);
    }

    pub fn is_maxwell_valid(&self) -> bool {
        self.sources.iter().all(FieldSource::is_maxwell_valid)
    }

    pub fn field_at(&self, r: &Vector3<f64>) -> Result<Vector3<f64>> {
        self.sources
            .iter()
            .try_fold(Vector3::zeros(), |acc, s| Ok(acc + s.field_at(r)?))
    }

    pub fn magnitude_at(&self, r: &Vector3<f64>) -> Result<f64> {
        Ok(self.field_at(r)?.norm())
    }

    pub fn gradient_tensor_at(&self, r: &Vector3<f64>) -> Result<Matrix3<f64>> {
        self.sources
            .iter()
            .try_fold(Matrix3::zeros(), |acc, s| Ok(acc + s.gradient_at(r)?))
    }

    /// ∇|B| = Gᵀ B / |B|.
    pub fn grad_magnitude_at(&self, r: &Vector3<f64>) -> Result<Vector3<f64>> {
        let b = self.field_at(r)?;
        let g = self.gradient_tensor_at(r)?;
        grad_magnitude(&b, &g)
    }
}

/// ∂|B|/∂x_i = Σ_j (B_j/|B|) ∂B_j/∂x_i.
pub fn grad_magnitude(b: &Vector3<f64>, g: &Matrix3<f64>) -> Result<Vector3<f64>> {
    let magnitude = b.norm();
    if magnitude < ZERO_FIELD {
        return Err(Error::ZeroField { magnitude });
    }
    Ok(g.transpose() * b / magnitude)
}

/// The dominant-component approximation ∂|B|/∂x_i ≈ sign(B_k) ∂B_k/∂x_i for the
/// largest field component k.
pub fn grad_magnitude_dominant(b: &Vector3<f64>, g: &Matrix3<f64>) -> Vector3<f64> {
    let k = b.iamax();
    g.row(k).transpose() * b[k].signum()
}

fn dipole_field(moment: &Vector3<f64>, d: &Vector3<f64>) -> Result<Vector3<f64>> {
    let r = d.norm();
    if r < SINGULAR_DISTANCE {
        return Err(Error::SingularPoint { distance: r });
    }
    let r3 = r * r * r;
    let rhat = d / r;
    Ok(MU0 / (4.0 * PI) * (3.0 * rhat * moment.dot(&rhat) - moment) / r3)
}

fn dipole_gradient(moment: &Vector3<f64>, d: &Vector3<f64>) -> Result<Matrix3<f64>> {
    let r = d.norm();
    if r < SINGULAR_DISTANCE {
        return Err(Error::SingularPoint { distance: r });
    }
    let r2 = r * r;
    let k = 3.0 * MU0 / (4.0 * PI * r2 * r2 * r);
    let mr = moment.dot(d);
    let g = Matrix3::identity() * mr + moment * d.transpose() + d * moment.transpose()
        - d * d.transpose() * (5.0 * mr / r2);
    Ok(g * k)
}

/// Field of a straight wire segment from `a` to `b` carrying unit current,
/// without the μ0 I / 4π prefactor.
fn segment_field(a: &Vector3<f64>, b: &Vector3<f64>, r: &Vector3<f64>) -> Result<Vector3<f64>> {
    let dist = point_segment_distance(a, b, r);
    if dist < SINGULAR_DISTANCE {
        return Err(Error::SingularPoint { distance: dist });
    }
    let r1 = r - a;
    let r2 = r - b;
    let n1 = r1.norm();
    let n2 = r2.norm();
    let denom = n1 * n2 * (n1 * n2 + r1.dot(&r2));
    if denom == 0.0 {
        return Ok(Vector3::zeros());
    }
    Ok(r1.cross(&r2) * ((n1 + n2) / denom))
}

/// Analytic Jacobian of [`segment_field`] with respect to `r`.
fn segment_gradient(a: &Vector3<f64>, b: &Vector3<f64>, r: &Vector3<f64>) -> Result<Matrix3<f64>> {
    let dist = point_segment_distance(a, b, r);
    if dist < SINGULAR_DISTANCE {
        return Err(Error::SingularPoint { distance: dist });
    }
    let r1 = r - a;
    let r2 = r - b;
    let (p, q, s) = (r1.norm(), r2.norm(), r1.dot(&r2));
    let d = p * q * (p * q + s);
    if d == 0.0 {
        return Ok(Matrix3::zeros());
    }
    let f = (p + q) / d;
    let dd_dp = q * (2.0 * p * q + s);
    let dd_dq = p * (2.0 * p * q + s);
    let df_dp = (d - (p + q) * dd_dp) / (d * d);
    let df_dq = (d - (p + q) * dd_dq) / (d * d);
    let df_ds = -(p + q) * p * q / (d * d);
    let grad_f = r1 * (df_dp / p) + r2 * (df_dq / q) + (r1 + r2) * df_ds;
    let cross = r1.cross(&r2);
    Ok((b - a).cross_matrix() * f + cross * grad_f.transpose())
}

fn point_segment_distance(a: &Vector3<f64>, b: &Vector3<f64>, r: &Vector3<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((r - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (r - (a + t * ab)).norm()
}

/// Fourth-order central differences of a vector field; column j holds ∂B/∂x_j.
pub fn finite_difference_gradient<F>(field: F, r: &Vector3<f64>, h: f64) -> Result<Matrix3<f64>>
where
    F: Fn(&Vector3<f64>) -> Result<Vector3<f64>>,
{
    let mut g = Matrix3::zeros();
    for j in 0..3 {
        let mut e = Vector3::zeros();
        e[j] = h;
        let d = (field(&(r - 2.0 * e))? - 8.0 * field(&(r - e))? + 8.0 * field(&(r + e))?
            - field(&(r + 2.0 * e))?)
            / (12.0 * h);
        g.set_column(j, &d);
    }
    Ok(g)
}

/// Two unit vectors completing a right-handed frame with `n` (u × v = n).
pub fn orthonormal_pair(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let n = n.normalize();
    let helper = if n.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let u = helper.cross(&n).normalize();
    let v = n.cross(&u);
    (u, v)
}

/// Relative trace and asymmetry of a gradient tensor: (|tr G|/‖G‖, ‖G − Gᵀ‖/‖G‖).
pub fn maxwell_residuals(g: &Matrix3<f64>) -> (f64, f64) {
    let scale = g.norm();
    if scale == 0.0 {
        return (0.0, 0.0);
    }
    (g.trace().abs() / scale, (g - g.transpose()).norm() / scale)
}
