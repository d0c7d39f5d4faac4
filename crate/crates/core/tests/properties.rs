use std::f64::consts::PI;

use nalgebra::{Complex, Matrix3, Vector2, Vector3};
use proptest::prelude::*;

use spinor_gradiometry::ellipse::{fit_conic, relative_phase, Conic, FitOptions};
use spinor_gradiometry::fieldmodel::{FieldScene, FieldSource};
use spinor_gradiometry::pipeline::{
    complete_tensor, dipole_bearing, unwrap, GradientMeasurement, InPlaneGradients, PhasePoint,
};
use spinor_gradiometry::sensitivity::{
    energy_resolution, spatiotemporal, sql_sensitivity, SensitivityParams,
};
use spinor_gradiometry::spinsim::{pulse, SpinState};

fn ellipse_points(dphi: f64, offset: f64, n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|k| {
            let phi = offset + 2.0 * PI * k as f64 / n as f64;
            ((phi + dphi).cos(), phi.cos())
        })
        .collect()
}

fn close_conics(a: &Conic, b: &Conic, tol: f64) -> bool {
    a.coefficients
        .iter()
        .zip(&b.coefficients)
        .all(|(x, y)| (x - y).abs() < tol)
}

fn traceless_symmetric() -> impl Strategy<Value = Matrix3<f64>> {
    prop::array::uniform5(-200.0..200.0f64)
        .prop_map(|[xx, zz, xy, xz, yz]| Matrix3::new(xx, xy, xz, xy, -(xx + zz), yz, xz, yz, zz))
}

fn in_plane_of(g: &Matrix3<f64>) -> InPlaneGradients {
    let mut p = InPlaneGradients::default();
    for j in 0..3 {
        p.set(j, false, g[(j, 0)], 0.1);
        p.set(j, true, g[(j, 2)], 0.1);
    }
    p
}

fn spin_state() -> impl Strategy<Value = SpinState> {
    prop::array::uniform6(-1.0..1.0f64)
        .prop_filter("non-zero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-3)
        .prop_map(|v| {
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let c = |i: usize| Complex::new(v[2 * i] / n, v[2 * i + 1] / n);
            SpinState::new([c(0), c(1), c(2)]).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ellipse_round_trip(dphi in 0.15..(PI - 0.15), offset in 0.0..(2.0 * PI), n in 8usize..40) {
        let conic = fit_conic(&ellipse_points(dphi, offset, n), &FitOptions::default()).unwrap();
        let est = relative_phase(&conic).unwrap();
        prop_assert!((est.abs_dphi - dphi).abs() < 1e-6, "{} vs {}", est.abs_dphi, dphi);
    }

    #[test]
    fn ellipse_fit_is_equivariant(
        dphi in 0.3..(PI - 0.3),
        scale in 0.1..10.0f64,
        tx in -5.0..5.0f64,
        ty in -5.0..5.0f64,
    ) {
        let pts = ellipse_points(dphi, 0.4, 24);
        let moved: Vec<_> = pts.iter().map(|&(x, y)| (scale * x + tx, scale * y + ty)).collect();
        let opts = FitOptions::default();
        let base = fit_conic(&pts, &opts).unwrap();
        let fit = fit_conic(&moved, &opts).unwrap();
        prop_assert!(close_conics(&fit, &base.transformed(scale, Vector2::new(tx, ty)), 1e-7));
        let a = relative_phase(&base).unwrap().abs_dphi;
        let b = relative_phase(&fit).unwrap().abs_dphi;
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn ellipse_fit_ignores_point_order(
        pts in (0.3..(PI - 0.3)).prop_flat_map(|d| Just(ellipse_points(d, 0.1, 20)).prop_shuffle())
    ) {
        let mut sorted = pts.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let opts = FitOptions::default();
        let a = fit_conic(&pts, &opts).unwrap();
        let b = fit_conic(&sorted, &opts).unwrap();
        prop_assert!(close_conics(&a, &b, 1e-10));
    }

    #[test]
    fn pulses_preserve_norm_and_compose(
        state in spin_state(),
        axis in 0.0..(2.0 * PI),
        a in -PI..PI,
        b in -PI..PI,
        delta in -50.0..50.0f64,
    ) {
        let once = pulse(&pulse(&state, axis, a), axis, b);
        let joint = pulse(&state, axis, a + b);
        prop_assert!((once.norm_squared() - 1.0).abs() < 1e-12);
        prop_assert!((state.precess(delta).norm_squared() - 1.0).abs() < 1e-12);
        prop_assert!((once.overlap(&joint) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scene_fields_add(
        m in prop::array::uniform3(-1e-3..1e-3f64),
        b0 in prop::array::uniform3(-1e-4..1e-4f64),
        r in prop::array::uniform3(0.02..0.2f64),
    ) {
        let dipole = FieldSource::dipole(Vector3::from(m), Vector3::zeros());
        let uniform = FieldSource::uniform(Vector3::from(b0));
        let scene = FieldScene::new(vec![dipole.clone(), uniform.clone()]);
        let r = Vector3::from(r);
        let sum = dipole.field_at(&r).unwrap() + uniform.field_at(&r).unwrap();
        prop_assert!((scene.field_at(&r).unwrap() - sum).norm() <= 1e-15 * sum.norm());
        let g = scene.gradient_tensor_at(&r).unwrap();
        prop_assert!((g - dipole.gradient_at(&r).unwrap()).norm() <= 1e-15 * g.norm());
    }

    #[test]
    fn dipole_gradient_satisfies_maxwell(
        m in prop::array::uniform3(-1.0..1.0f64),
        r in prop::array::uniform3(-1.0..1.0f64),
    ) {
        let r = Vector3::from(r);
        prop_assume!(r.norm() > 0.05);
        let g = FieldSource::dipole(Vector3::from(m), Vector3::zeros()).gradient_at(&r).unwrap();
        prop_assert!(g.trace().abs() <= 1e-10 * g.norm());
        prop_assert!((g - g.transpose()).norm() <= 1e-10 * g.norm());
    }

    #[test]
    fn completion_is_idempotent(g in traceless_symmetric()) {
        let first = complete_tensor(&in_plane_of(&g)).unwrap();
        let second = complete_tensor(&in_plane_of(&first.raw)).unwrap();
        prop_assert_eq!(first.raw, second.raw);
        prop_assert_eq!(first.symmetric, second.symmetric);
        let diag = g[(0, 0)].abs().max(g[(2, 2)].abs());
        prop_assert!(first.raw.trace().abs() <= 2.0 * f64::EPSILON * diag);
        prop_assert!((first.raw - g).norm() <= 1e-12 * g.norm().max(1.0));
    }

    #[test]
    fn bearing_is_scale_invariant(g in traceless_symmetric(), k in prop_oneof![1e-3..1e3f64, -1e3..-1e-3f64]) {
        let Ok(a) = dipole_bearing(&g) else { return Ok(()) };
        prop_assume!(a.relative_gap > 1e-3);
        let b = dipole_bearing(&(g * k)).unwrap();
        prop_assert!((a.direction - b.direction).norm() < 1e-9);
    }

    #[test]
    fn frame_rotation_matches_forward_model(
        g in traceless_symmetric(),
        first_deg in -90.0..90.0f64,
        gap_deg in 10.0..170.0f64,
        component in 0usize..3,
    ) {
        let measure = |deg: f64, label: &str| {
            let d = Vector3::new(deg.to_radians().cos(), 0.0, deg.to_radians().sin());
            GradientMeasurement {
                component,
                direction: d,
                baseline_frame: label.into(),
                value: (g.row(component) * d)[0],
                sigma: 0.1,
                bias_sign: 1.0,
            }
        };
        let ms = [measure(first_deg, "a"), measure(first_deg + gap_deg, "b")];
        let p = InPlaneGradients::from_measurements(&ms).unwrap();
        let want = [g[(component, 0)], g[(component, 2)]];
        for (along_z, w) in [(false, want[0]), (true, want[1])] {
            let got = p.entries[component][usize::from(along_z)].unwrap().0;
            prop_assert!((got - w).abs() < 1e-9 * g.norm().max(1.0), "{} vs {}", got, w);
        }
    }

    #[test]
    fn unwrap_recovers_folded_line(slope_per_ms in prop_oneof![0.5..5.0f64, -5.0..-0.5f64], n in 5usize..20) {
        let series: Vec<PhasePoint> = (1..=n)
            .map(|k| {
                let t = 0.2e-3 * k as f64;
                let folded = (slope_per_ms * t * 1e3).rem_euclid(2.0 * PI);
                PhasePoint { t, abs_dphi: folded.min(2.0 * PI - folded), sigma: 0.01 }
            })
            .collect();
        // Within a few σ of a fold the branch is genuinely undetermined.
        prop_assume!(series.iter().all(|p| p.abs_dphi > 0.05 && p.abs_dphi < PI - 0.05));
        let out = unwrap(&series, slope_per_ms.signum()).unwrap();
        for p in out {
            prop_assert!((p.dphi - slope_per_ms * p.t * 1e3).abs() < 1e-9);
        }
    }
}

fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn sensitivity_power_laws() {
    let decades: Vec<f64> = (0..=12).map(|k| 10f64.powf(k as f64 / 4.0)).collect();
    let by_atoms: Vec<f64> = decades
        .iter()
        .map(|&x| sql_sensitivity(&SensitivityParams::new(1e3 * x, 3e-3, 25.0, 3.0)).unwrap())
        .collect();
    assert!((log_slope(&decades, &by_atoms) + 0.5).abs() < 1e-9);

    let by_kappa: Vec<f64> = decades
        .iter()
        .map(|&x| sql_sensitivity(&SensitivityParams::new(1e5, 3e-3, 25.0, x)).unwrap())
        .collect();
    assert!((log_slope(&decades, &by_kappa) - 1.0).abs() < 1e-9);

    let times: Vec<f64> = decades.iter().map(|x| 1e-4 * x).collect();
    let by_time: Vec<f64> = times
        .iter()
        .map(|&t| sql_sensitivity(&SensitivityParams::with_duty_cycle(1e5, t, 0.01, 1.0)).unwrap())
        .collect();
    assert!((log_slope(&times, &by_time) + 0.5).abs() < 1e-9);

    let volumes: Vec<f64> = decades.iter().map(|x| 1e-15 * x).collect();
    let st: Vec<f64> = volumes
        .iter()
        .map(|&v| spatiotemporal(1e-12, v).unwrap())
        .collect();
    assert!((log_slope(&volumes, &st) - 0.5).abs() < 1e-9);
    let er: Vec<f64> = volumes
        .iter()
        .map(|&v| energy_resolution(1e-12, 0.1, v).unwrap())
        .collect();
    assert!((log_slope(&volumes, &er) - 1.0).abs() < 1e-9);
    let fields: Vec<f64> = decades.iter().map(|x| 1e-15 * x).collect();
    let er: Vec<f64> = fields
        .iter()
        .map(|&b| energy_resolution(b, 0.1, 1e-14).unwrap())
        .collect();
    assert!((log_slope(&fields, &er) - 2.0).abs() < 1e-9);
}
