use std::ffi::CStr;
use std::ptr;

use spinor_gradiometry_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as std::ffi::c_char; 256];
    let n = unsafe { sg_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn scene_field_and_gradient() {
    let scene = sg_scene_new();
    unsafe {
        assert_eq!(
            sg_scene_add_uniform(scene, [0.0, 50e-6, 0.0].as_ptr()),
            SgStatus::Ok
        );
        let g = [0.0, -1e-6, 0.0, -1e-6, 0.0, 2e-6, 0.0, 2e-6, 0.0];
        assert_eq!(
            sg_scene_add_linear_gradient(scene, [0.0; 3].as_ptr(), g.as_ptr(), [0.0; 3].as_ptr()),
            SgStatus::Ok
        );
        assert_eq!(sg_scene_len(scene), 2);

        let mut b = [0.0; 3];
        let r = [0.01, 0.0, 0.0];
        assert_eq!(
            sg_scene_field(scene, r.as_ptr(), b.as_mut_ptr()),
            SgStatus::Ok
        );
        assert!((b[1] - (50e-6 - 1e-8)).abs() < 1e-18);

        let mut out = [0.0; 9];
        assert_eq!(
            sg_scene_gradient(scene, r.as_ptr(), out.as_mut_ptr()),
            SgStatus::Ok
        );
        assert_eq!(out, g);

        let mut gb = [0.0; 3];
        assert_eq!(
            sg_scene_grad_magnitude(scene, r.as_ptr(), gb.as_mut_ptr()),
            SgStatus::Ok
        );
        assert!((gb[0] + 1e-6).abs() < 1e-9);
        sg_scene_free(scene);
    }
}

#[test]
fn rejects_non_maxwell_gradient() {
    let scene = sg_scene_new();
    let g = [1e-6, 0.0, 0.0, 0.0, 1e-6, 0.0, 0.0, 0.0, 1e-6];
    let status = unsafe {
        sg_scene_add_linear_gradient(scene, [0.0; 3].as_ptr(), g.as_ptr(), [0.0; 3].as_ptr())
    };
    assert_eq!(status, SgStatus::InvalidInput);
    assert!(last_error().contains("Maxwell"));
    unsafe { sg_scene_free(scene) };
}

#[test]
fn coils_and_singular_points() {
    let scene = sg_scene_new();
    unsafe {
        let c = [0.0; 3];
        let z = [0.0, 0.0, 1.0];
        assert_eq!(
            sg_scene_add_coil_pair(scene, c.as_ptr(), z.as_ptr(), 0.05, 0.05, 1.0, true, 64),
            SgStatus::Ok
        );
        assert_eq!(
            sg_scene_add_coil_loop(scene, c.as_ptr(), z.as_ptr(), 0.1, 1.0, 2),
            SgStatus::InvalidInput
        );
        assert_eq!(
            sg_scene_add_dipole(scene, [0.0, 0.0, 1e-3].as_ptr(), [0.1, 0.0, 0.0].as_ptr()),
            SgStatus::Ok
        );

        let mut g = [0.0; 9];
        assert_eq!(
            sg_scene_gradient(scene, [0.001, 0.002, 0.003].as_ptr(), g.as_mut_ptr()),
            SgStatus::Ok
        );
        let trace = g[0] + g[4] + g[8];
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(trace.abs() < 1e-10 * norm);

        let mut b = [0.0; 3];
        let status = sg_scene_field(scene, [0.1, 0.0, 0.0].as_ptr(), b.as_mut_ptr());
        assert_eq!(status, SgStatus::SingularPoint);
        sg_scene_free(scene);
    }
}

#[test]
fn null_pointers_are_reported() {
    let mut out = [0.0; 3];
    unsafe {
        assert_eq!(
            sg_scene_field(ptr::null(), [0.0; 3].as_ptr(), out.as_mut_ptr()),
            SgStatus::NullPointer
        );
        assert!(last_error().contains("scene"));
        let scene = sg_scene_new();
        assert_eq!(
            sg_scene_add_uniform(scene, ptr::null()),
            SgStatus::NullPointer
        );
        assert_eq!(sg_scene_len(ptr::null()), 0);
        sg_scene_free(scene);
        sg_scene_free(ptr::null_mut());
    }
}

#[test]
fn phase_from_ellipse() {
    let dphi: f64 = 1.1;
    let (x, y): (Vec<f64>, Vec<f64>) = (0..24)
        .map(|k| {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / 24.0;
            ((phi + dphi + 0.3).cos(), (phi + 0.3).cos())
        })
        .unzip();
    let (mut est, mut sigma) = (0.0, -1.0);
    let status = unsafe {
        sg_fit_phase(
            x.as_ptr(),
            y.as_ptr(),
            x.len(),
            0.0,
            0,
            1,
            &mut est,
            &mut sigma,
        )
    };
    assert_eq!(status, SgStatus::Ok);
    assert!((est - dphi).abs() < 1e-9);
    assert_eq!(sigma, 0.0);

    let mut conic = [0.0; 6];
    assert_eq!(
        unsafe { sg_fit_conic(x.as_ptr(), y.as_ptr(), x.len(), 0.0, conic.as_mut_ptr()) },
        SgStatus::Ok
    );
    let norm = conic.iter().map(|c| c * c).sum::<f64>().sqrt();
    assert!((norm - 1.0).abs() < 1e-12);

    let status =
        unsafe { sg_fit_phase(x.as_ptr(), y.as_ptr(), 3, 0.0, 0, 1, &mut est, &mut sigma) };
    assert_eq!(status, SgStatus::DegenerateConic);
}

#[test]
fn tensor_completion_and_bearing() {
    let in_plane = [10.0, 3.0, -4.0, 5.0, 3.0, 2.0];
    let mut raw = [0.0; 9];
    let mut sym = [0.0; 9];
    let status = unsafe {
        sg_complete_tensor(
            in_plane.as_ptr(),
            ptr::null(),
            raw.as_mut_ptr(),
            sym.as_mut_ptr(),
        )
    };
    assert_eq!(status, SgStatus::Ok);
    assert_eq!(raw[0] + raw[4] + raw[8], 0.0);
    assert_eq!(raw[1], -4.0);
    assert_eq!(raw[7], 5.0);

    let mut dir = [0.0; 3];
    let mut gap = 0.0;
    assert_eq!(
        unsafe { sg_dipole_bearing(sym.as_ptr(), dir.as_mut_ptr(), &mut gap) },
        SgStatus::Ok
    );
    assert!((dir.iter().map(|d| d * d).sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(gap > 0.0);

    let mut missing = in_plane;
    missing[3] = f64::NAN;
    let status = unsafe {
        sg_complete_tensor(
            missing.as_ptr(),
            ptr::null(),
            raw.as_mut_ptr(),
            sym.as_mut_ptr(),
        )
    };
    assert_eq!(status, SgStatus::MissingComponent);

    let iso = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    assert_eq!(
        unsafe { sg_dipole_bearing(iso.as_ptr(), dir.as_mut_ptr(), ptr::null_mut()) },
        SgStatus::DegenerateEigenvalues
    );
}

#[test]
fn sensitivity_figures() {
    let mut s = 0.0;
    assert_eq!(
        unsafe { sg_sql_sensitivity(1e5, 3e-3, 5.0, 1.0, &mut s) },
        SgStatus::Ok
    );
    assert!(s > 0.0);
    assert_eq!(
        unsafe { sg_sql_sensitivity(0.0, 3e-3, 5.0, 1.0, &mut s) },
        SgStatus::InvalidInput
    );
    let mut e = 0.0;
    assert_eq!(
        unsafe { sg_energy_resolution(5e-15, 3e-3, 1e-9, &mut e) },
        SgStatus::Ok
    );
    assert!(e > 0.0);
}
