//! C ABI over the gradiometry core.
//!
//! Every function returns an [`SgStatus`]; on failure a message is available
//! from [`sg_last_error_message`] on the same thread. Vectors are `double[3]`,
//! matrices `double[9]` in row-major order with entry (i, j) = ∂B_i/∂x_j.
//! All quantities are SI.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use nalgebra::{Matrix3, Vector3};
use spinor_gradiometry::ellipse::{estimate_phase, fit_conic, FitOptions};
use spinor_gradiometry::fieldmodel::{CoilLoop, CoilPair, FieldScene, FieldSource};
use spinor_gradiometry::pipeline::{complete_tensor, dipole_bearing, InPlaneGradients};
use spinor_gradiometry::sensitivity::{self, SensitivityParams};
use spinor_gradiometry::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    SingularPoint = 3,
    ZeroField = 4,
    DegenerateConic = 5,
    NotAnEllipse = 6,
    MissingComponent = 7,
    DegenerateEigenvalues = 8,
    ZeroDenominator = 9,
    Other = 10,
    Panic = 11,
}

impl From<&Error> for SgStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::SingularPoint { .. } => SgStatus::SingularPoint,
            Error::ZeroField { .. } => SgStatus::ZeroField,
            Error::DegenerateConic(_) | Error::TooFewPoints { .. } => SgStatus::DegenerateConic,
            Error::NotAnEllipse => SgStatus::NotAnEllipse,
            Error::MissingComponent(_) => SgStatus::MissingComponent,
            Error::DegenerateEigenvalues { .. } => SgStatus::DegenerateEigenvalues,
            Error::ZeroDenominator(_) => SgStatus::ZeroDenominator,
            Error::InvalidInput(_) | Error::Config { .. } => SgStatus::InvalidInput,
            _ => SgStatus::Other,
        }
    }
}

/// Opaque collection of field sources.
pub struct SgScene {
    scene: FieldScene,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(SgStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(SgStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SgStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SgStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SgStatus::Panic
        }
    }
}

unsafe fn read<'a, const N: usize>(p: *const f64, what: &str) -> Result<&'a [f64; N], Failure> {
    p.cast::<[f64; N]>().as_ref().ok_or_else(|| null(what))
}

unsafe fn write<'a, const N: usize>(p: *mut f64, what: &str) -> Result<&'a mut [f64; N], Failure> {
    p.cast::<[f64; N]>().as_mut().ok_or_else(|| null(what))
}

unsafe fn scene_ref<'a>(p: *const SgScene) -> Result<&'a SgScene, Failure> {
    p.as_ref().ok_or_else(|| null("scene"))
}

unsafe fn scene_mut<'a>(p: *mut SgScene) -> Result<&'a mut SgScene, Failure> {
    p.as_mut().ok_or_else(|| null("scene"))
}

unsafe fn vec3(p: *const f64, what: &str) -> Result<Vector3<f64>, Failure> {
    Ok(Vector3::from(*read::<3>(p, what)?))
}

fn put_vec(out: &mut [f64; 3], v: &Vector3<f64>) {
    out.copy_from_slice(v.as_slice());
}

fn put_mat(out: &mut [f64; 9], m: &Matrix3<f64>) {
    for i in 0..3 {
        for j in 0..3 {
            out[3 * i + j] = m[(i, j)];
        }
    }
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL,
/// or 0 when there is none.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sg_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Creates an empty scene. Free it with [`sg_scene_free`].
#[no_mangle]
pub extern "C" fn sg_scene_new() -> *mut SgScene {
    Box::into_raw(Box::new(SgScene {
        scene: FieldScene::default(),
    }))
}

/// # Safety
/// `scene` must be null or come from [`sg_scene_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sg_scene_free(scene: *mut SgScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// Number of sources in the scene, or 0 for a null handle.
///
/// # Safety
/// `scene` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sg_scene_len(scene: *const SgScene) -> usize {
    scene.as_ref().map_or(0, |s| s.scene.sources.len())
}

/// # Safety
/// `scene` must be a live handle and `field` point to 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn sg_scene_add_uniform(scene: *mut SgScene, field: *const f64) -> SgStatus {
    guard(|| {
        let b = vec3(field, "field")?;
        scene_mut(scene)?.scene.push(FieldSource::uniform(b));
        Ok(())
    })
}

/// Point dipole with moment in A·m².
///
/// # Safety
/// `scene` must be a live handle; `moment` and `position` point to 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn sg_scene_add_dipole(
    scene: *mut SgScene,
    moment: *const f64,
    position: *const f64,
) -> SgStatus {
    guard(|| {
        let m = vec3(moment, "moment")?;
        let r = vec3(position, "position")?;
        scene_mut(scene)?.scene.push(FieldSource::dipole(m, r));
        Ok(())
    })
}

/// B(r) = field + gradient · (r − origin). The gradient must be traceless and symmetric.
///
/// # Safety
/// `scene` must be a live handle; `field` and `origin` point to 3 doubles, `gradient` to 9.
#[no_mangle]
pub unsafe extern "C" fn sg_scene_add_linear_gradient(
    scene: *mut SgScene,
    field: *const f64,
    gradient: *const f64,
    origin: *const f64,
) -> SgStatus {
    guard(|| {
        let b = vec3(field, "field")?;
        let g = Matrix3::from_row_slice(read::<9>(gradient, "gradient")?);
        let o = vec3(origin, "origin")?;
        let source = FieldSource::linear_gradient(b, g, o)?;
        scene_mut(scene)?.scene.push(source);
        Ok(())
    })
}

/// Polygonal circular loop; current in A, counter-clockwise about `normal`.
///
/// # Safety
/// `scene` must be a live handle; `center` and `normal` point to 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn sg_scene_add_coil_loop(
    scene: *mut SgScene,
    center: *const f64,
    normal: *const f64,
    radius: f64,
    current: f64,
    segments: usize,
) -> SgStatus {
    guard(|| {
        let c = vec3(center, "center")?;
        let n = vec3(normal, "normal")?;
        let coil = CoilLoop::new(c, n, radius, current, segments)?;
        scene_mut(scene)?.scene.push(FieldSource::CoilLoop(coil));
        Ok(())
    })
}

/// Coaxial loop pair at ±separation/2 along `axis`; `opposed` reverses the second current.
///
/// # Safety
/// `scene` must be a live handle; `center` and `axis` point to 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn sg_scene_add_coil_pair(
    scene: *mut SgScene,
    center: *const f64,
    axis: *const f64,
    radius: f64,
    separation: f64,
    current: f64,
    opposed: bool,
    segments: usize,
) -> SgStatus {
    guard(|| {
        let c = vec3(center, "center")?;
        let a = vec3(axis, "axis")?;
        let pair = CoilPair::new(c, a, radius, separation, current, opposed, segments)?;
        scene_mut(scene)?.scene.push(FieldSource::CoilPair(pair));
        Ok(())
    })
}

/// Field at `r`, tesla.
///
/// # Safety
/// `scene` must be a live handle; `r` and `out` point to 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn sg_scene_field(
    scene: *const SgScene,
    r: *const f64,
    out: *mut f64,
) -> SgStatus {
    guard(|| {
        let b = scene_ref(scene)?.scene.field_at(&vec3(r, "r")?)?;
        put_vec(write(out, "out")?, &b);
        Ok(())
    })
}

/// Gradient tensor at `r`, T/m.
///
/// # Safety
/// `scene` must be a live handle; `r` points to 3 doubles and `out` to 9.
#[no_mangle]
pub unsafe extern "C" fn sg_scene_gradient(
    scene: *const SgScene,
    r: *const f64,
    out: *mut f64,
) -> SgStatus {
    guard(|| {
        let g = scene_ref(scene)?.scene.gradient_tensor_at(&vec3(r, "r")?)?;
        put_mat(write(out, "out")?, &g);
        Ok(())
    })
}

/// ∇|B| at `r`, T/m.
///
/// # Safety
/// `scene` must be a live handle; `r` and `out` point to 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn sg_scene_grad_magnitude(
    scene: *const SgScene,
    r: *const f64,
    out: *mut f64,
) -> SgStatus {
    guard(|| {
        let g = scene_ref(scene)?.scene.grad_magnitude_at(&vec3(r, "r")?)?;
        put_vec(write(out, "out")?, &g);
        Ok(())
    })
}

unsafe fn points(x: *const f64, y: *const f64, n: usize) -> Result<Vec<(f64, f64)>, Failure> {
    if x.is_null() {
        return Err(null("x"));
    }
    if y.is_null() {
        return Err(null("y"));
    }
    let xs = std::slice::from_raw_parts(x, n);
    let ys = std::slice::from_raw_parts(y, n);
    Ok(xs.iter().copied().zip(ys.iter().copied()).collect())
}

/// Direct ellipse fit of (x[k], y[k]). Writes the unit-norm conic
/// (a, b, c, d, e, f) of aX² + bXY + cY² + dX + eY + f = 0.
///
/// # Safety
/// `x` and `y` point to `n` doubles; `out` to 6.
#[no_mangle]
pub unsafe extern "C" fn sg_fit_conic(
    x: *const f64,
    y: *const f64,
    n: usize,
    noise_floor: f64,
    out: *mut f64,
) -> SgStatus {
    guard(|| {
        let pts = points(x, y, n)?;
        let conic = fit_conic(&pts, &FitOptions::default().with_noise_floor(noise_floor))?;
        write::<6>(out, "out")?.copy_from_slice(&conic.coefficients);
        Ok(())
    })
}

/// |Δφ| in [0, π] from an ellipse fit, with a bootstrap σ when `n_resamples` > 1.
///
/// # Safety
/// `x` and `y` point to `n` doubles; `abs_dphi` and `sigma` to one double each.
#[no_mangle]
pub unsafe extern "C" fn sg_fit_phase(
    x: *const f64,
    y: *const f64,
    n: usize,
    noise_floor: f64,
    n_resamples: usize,
    seed: u64,
    abs_dphi: *mut f64,
    sigma: *mut f64,
) -> SgStatus {
    guard(|| {
        let pts = points(x, y, n)?;
        let opts = FitOptions::default().with_noise_floor(noise_floor);
        let est = estimate_phase(&pts, &opts, n_resamples, seed)?;
        *abs_dphi.as_mut().ok_or_else(|| null("abs_dphi"))? = est.abs_dphi;
        *sigma.as_mut().ok_or_else(|| null("sigma"))? = est.sigma;
        Ok(())
    })
}

/// Completes the tensor from six in-plane derivatives ordered
/// ∂Bx/∂x, ∂Bx/∂z, ∂By/∂x, ∂By/∂z, ∂Bz/∂x, ∂Bz/∂z. A NaN marks a missing
/// entry. `sigmas` may be null. Writes the tensor as measured (xz and zx kept
/// apart) and its symmetrised form.
///
/// # Safety
/// `in_plane` points to 6 doubles, `sigmas` is null or points to 6, the outputs to 9 each.
#[no_mangle]
pub unsafe extern "C" fn sg_complete_tensor(
    in_plane: *const f64,
    sigmas: *const f64,
    raw: *mut f64,
    symmetric: *mut f64,
) -> SgStatus {
    guard(|| {
        let values = read::<6>(in_plane, "in_plane")?;
        let sigmas = if sigmas.is_null() {
            &[0.0; 6]
        } else {
            read::<6>(sigmas, "sigmas")?
        };
        let mut g = InPlaneGradients::default();
        for k in 0..6 {
            if !values[k].is_nan() {
                g.set(k / 2, k % 2 == 1, values[k], sigmas[k]);
            }
        }
        let t = complete_tensor(&g)?;
        put_mat(write(raw, "raw")?, &t.raw);
        put_mat(write(symmetric, "symmetric")?, &t.symmetric);
        Ok(())
    })
}

/// Unit eigenvector of the largest-|λ| eigenvalue of a symmetric tensor.
///
/// # Safety
/// `tensor` points to 9 doubles, `direction` to 3; `relative_gap` may be null.
#[no_mangle]
pub unsafe extern "C" fn sg_dipole_bearing(
    tensor: *const f64,
    direction: *mut f64,
    relative_gap: *mut f64,
) -> SgStatus {
    guard(|| {
        let g = Matrix3::from_row_slice(read::<9>(tensor, "tensor")?);
        let b = dipole_bearing(&g)?;
        put_vec(write(direction, "direction")?, &b.direction);
        if let Some(gap) = relative_gap.as_mut() {
            *gap = b.relative_gap;
        }
        Ok(())
    })
}

/// Projection-noise-limited δB·√T_int in T/√Hz.
///
/// # Safety
/// `out` points to one double.
#[no_mangle]
pub unsafe extern "C" fn sg_sql_sensitivity(
    n_atoms: f64,
    t: f64,
    t_shot: f64,
    kappa: f64,
    out: *mut f64,
) -> SgStatus {
    guard(|| {
        let s = sensitivity::sql_sensitivity(&SensitivityParams::new(n_atoms, t, t_shot, kappa))?;
        *out.as_mut().ok_or_else(|| null("out"))? = s;
        Ok(())
    })
}

/// Energy resolution in units of ħ for a sensitivity in T/√Hz and a volume in m³.
///
/// # Safety
/// `out` points to one double.
#[no_mangle]
pub unsafe extern "C" fn sg_energy_resolution(
    db_rt_hz: f64,
    t: f64,
    volume: f64,
    out: *mut f64,
) -> SgStatus {
    guard(|| {
        let e = sensitivity::energy_resolution(db_rt_hz, t, volume)?;
        *out.as_mut().ok_or_else(|| null("out"))? = e;
        Ok(())
    })
}
