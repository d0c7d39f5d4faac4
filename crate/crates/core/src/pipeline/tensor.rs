//! Maxwell completion of in-plane measurements, eigen-analysis and nulling advice.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;

use super::frame::rotate_frame;
use super::gradient::GradientMeasurement;

/// Minimum relative gap between the two largest |λ| for a bearing to be defined.
pub const EIGEN_GAP_THRESHOLD: f64 = 1e-6;

const AXES: [&str; 3] = ["x", "y", "z"];

/// ∂B_j/∂x and ∂B_j/∂z for j = x, y, z, each as (value, σ) in T/m.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct InPlaneGradients {
    /// Indexed `[component][0 = ∂/∂x, 1 = ∂/∂z]`.
    pub entries: [[Option<(f64, f64)>; 2]; 3],
}

impl InPlaneGradients {
    pub fn set(&mut self, component: usize, along_z: bool, value: f64, sigma: f64) {
        self.entries[component][usize::from(along_z)] = Some((value, sigma));
    }

    /// Collects measurements per field component. Pairs along x̂ and ẑ are used
    /// as given; any other pair of in-plane baselines is rotated to x̂/ẑ.
    pub fn from_measurements(measurements: &[GradientMeasurement]) -> Result<Self> {
        let mut out = Self::default();
        for component in 0..3 {
            let group: Vec<&GradientMeasurement> = measurements
                .iter()
                .filter(|m| m.component == component)
                .collect();
            let along = |m: &GradientMeasurement, axis: Vector3<f64>| {
                (m.direction.normalize() - axis).norm() < 1e-9
            };
            let cartesian = group
                .iter()
                .all(|m| along(m, Vector3::x()) || along(m, Vector3::z()));
            let resolved: Vec<GradientMeasurement> = match group.len() {
                0 => Vec::new(),
                _ if cartesian => group.iter().map(|m| (*m).clone()).collect(),
                2 => rotate_frame(group[0], group[1])?.to_vec(),
                n => {
                    return Err(Error::invalid(format!(
                        "{n} non-Cartesian measurements of component {}; need exactly two",
                        AXES[component]
                    )))
                }
            };
            for m in resolved {
                out.set(component, along(&m, Vector3::z()), m.value, m.sigma);
            }
        }
        if let Some(m) = measurements.iter().find(|m| m.component > 2) {
            return Err(Error::invalid(format!(
                "no field component {}",
                m.component
            )));
        }
        Ok(out)
    }

    fn get(&self, component: usize, along_z: bool) -> Result<(f64, f64)> {
        self.entries[component][usize::from(along_z)].ok_or_else(|| {
            Error::MissingComponent(format!(
                "dB{}/d{}",
                AXES[component],
                if along_z { "z" } else { "x" }
            ))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientTensor {
    /// Measured entries as given, column y inferred. T/m.
    pub raw: Matrix3<f64>,
    /// Measured symmetric pairs averaged; traceless and symmetric. T/m.
    pub symmetric: Matrix3<f64>,
    /// 1σ uncertainties of `symmetric`. T/m.
    pub sigma: Matrix3<f64>,
    /// True for entries inferred from ∇×B = 0 and ∇·B = 0.
    pub inferred_mask: [[bool; 3]; 3],
    /// Largest |G_ij − G_ji| over measured pairs. T/m.
    pub asymmetry: f64,
    pub asymmetry_sigma: f64,
}

/// `y` with (a + y) + b == 0 exactly, searched within a few ulps of −(a + b).
/// When no such double exists the nearest value −(a + b) is returned and the
/// trace is off by at most half an ulp of a + b.
fn traceless_complement(a: f64, b: f64) -> f64 {
    let start = -(a + b);
    let mut y = start;
    for step in 0..16 {
        if (a + y) + b == 0.0 {
            return y;
        }
        let k = (step / 2 + 1) as u64;
        let bits = start.to_bits();
        y = if step % 2 == 0 {
            f64::from_bits(bits.wrapping_add(k))
        } else {
            f64::from_bits(bits.wrapping_sub(k))
        };
    }
    start
}

/// Completes the tensor from the six in-plane derivatives using
/// ∂B_x/∂y = ∂B_y/∂x, ∂B_z/∂y = ∂B_y/∂z and ∂B_y/∂y = −∂B_x/∂x − ∂B_z/∂z.
pub fn complete_tensor(in_plane: &InPlaneGradients) -> Result<GradientTensor> {
    let (xx, sxx) = in_plane.get(0, false)?;
    let (xz, sxz) = in_plane.get(0, true)?;
    let (yx, syx) = in_plane.get(1, false)?;
    let (yz, syz) = in_plane.get(1, true)?;
    let (zx, szx) = in_plane.get(2, false)?;
    let (zz, szz) = in_plane.get(2, true)?;

    let yy = traceless_complement(xx, zz);
    let syy = sxx.hypot(szz);
    let raw = Matrix3::new(xx, yx, xz, yx, yy, yz, zx, yz, zz);

    let pair = 0.5 * (xz + zx);
    let spair = 0.5 * sxz.hypot(szx);
    let symmetric = Matrix3::new(xx, yx, pair, yx, yy, yz, pair, yz, zz);
    let sigma = Matrix3::new(sxx, syx, spair, syx, syy, syz, spair, syz, szz);

    let mut inferred_mask = [[false; 3]; 3];
    for row in inferred_mask.iter_mut() {
        row[1] = true;
    }
    Ok(GradientTensor {
        raw,
        symmetric,
        sigma,
        inferred_mask,
        asymmetry: (xz - zx).abs(),
        asymmetry_sigma: sxz.hypot(szx),
    })
}

/// Eigen-analysis of a symmetric gradient tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bearing {
    /// Eigenvector of the largest-|λ| eigenvalue, oriented towards +x.
    pub direction: Vector3<f64>,
    /// Eigenvalues ordered by decreasing |λ|.
    pub eigenvalues: Vector3<f64>,
    /// Matching eigenvectors as columns.
    pub eigenvectors: Matrix3<f64>,
    /// (|λ₁| − |λ₂|)/|λ₁|.
    pub relative_gap: f64,
}

fn orient_positive(v: Vector3<f64>) -> Vector3<f64> {
    let lead = v.iter().copied().find(|c| c.abs() > 1e-12).unwrap_or(1.0);
    if lead < 0.0 {
        -v
    } else {
        v
    }
}

fn sorted_eigen(g: &Matrix3<f64>) -> (Vector3<f64>, Matrix3<f64>) {
    let e = symmetric_eigen(g).sorted_by(|l| -l.abs());
    let vectors = Matrix3::from_columns(&[
        orient_positive(e.vectors.column(0).into_owned()),
        orient_positive(e.vectors.column(1).into_owned()),
        orient_positive(e.vectors.column(2).into_owned()),
    ]);
    (e.values, vectors)
}

/// Direction of the eigenvector with the largest-magnitude eigenvalue.
pub fn dipole_bearing(g: &Matrix3<f64>) -> Result<Bearing> {
    let (values, vectors) = sorted_eigen(g);
    let top = values[0].abs();
    let gap = if top > 0.0 {
        (top - values[1].abs()) / top
    } else {
        0.0
    };
    if !(gap > EIGEN_GAP_THRESHOLD) {
        return Err(Error::DegenerateEigenvalues { gap });
    }
    Ok(Bearing {
        direction: vectors.column(0).into_owned(),
        eigenvalues: values,
        eigenvectors: vectors,
        relative_gap: gap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasDirectionGradient {
    pub label: String,
    pub direction: Vector3<f64>,
    /// ∇|B| for a bias field along `direction`, T/m.
    pub grad_b: Vector3<f64>,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullingAdvice {
    /// Eigenaxes as columns, ordered by decreasing |λ|.
    pub eigenaxes: Matrix3<f64>,
    pub eigenvalues: Vector3<f64>,
    /// Diagonal gradients to apply along each eigenaxis to cancel the tensor, T/m.
    pub corrections: Vector3<f64>,
    pub bias_directions: Vec<BiasDirectionGradient>,
    /// max/min of |∇|B|| over `bias_directions`; `None` if the minimum is zero.
    pub magnitude_ratio: Option<f64>,
}

/// Eigenframe corrections and |∇|B|| for a bias along ±x, ±y, ±z and each eigenaxis.
pub fn grad_nulling_advice(g: &Matrix3<f64>) -> NullingAdvice {
    let sym = 0.5 * (g + g.transpose());
    let (values, vectors) = sorted_eigen(&sym);
    let mut dirs: Vec<(String, Vector3<f64>)> = Vec::new();
    for (k, name) in AXES.iter().enumerate() {
        let mut e = Vector3::zeros();
        e[k] = 1.0;
        dirs.push((format!("+{name}"), e));
        dirs.push((format!("-{name}"), -e));
    }
    for k in 0..3 {
        let v = vectors.column(k).into_owned();
        dirs.push((format!("+e{}", k + 1), v));
        dirs.push((format!("-e{}", k + 1), -v));
    }
    let bias_directions: Vec<BiasDirectionGradient> = dirs
        .into_iter()
        .map(|(label, n)| {
            let grad_b = sym.transpose() * n;
            BiasDirectionGradient {
                label,
                direction: n,
                magnitude: grad_b.norm(),
                grad_b,
            }
        })
        .collect();
    let max = bias_directions
        .iter()
        .map(|b| b.magnitude)
        .fold(0.0, f64::max);
    let min = bias_directions
        .iter()
        .map(|b| b.magnitude)
        .fold(f64::INFINITY, f64::min);
    NullingAdvice {
        eigenaxes: vectors,
        eigenvalues: values,
        corrections: -values,
        bias_directions,
        magnitude_ratio: (min > 0.0).then(|| max / min),
    }
}
