use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use spinor_gradiometry::io::{read_shot_table, SHOT_HEADER};
use spinor_gradiometry::scenario::demo_config;

fn gradiometer(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gradiometer"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const UNIFORM: &str = r#"
seed = 11

[bias]
axis = "y"
magnitude_uT = 50

[baseline]
axis = "z'"
separation_um = 840

[sequence]
T_ms = [1.0]
phi_count = 10
"#;

const PRINTED: &str = "component,derivative,value_nT_per_mm,sigma_nT_per_mm
x,x,-57.1,0.7
x,z,147.0,0.7
y,x,-69.2,0.4
y,z,26.6,0.4
z,x,149.5,0.3
z,z,-94.7,0.3
";

#[test]
fn simulate_writes_one_row_per_shot() {
    let dir = TempDir::new().unwrap();
    let scenario = write(dir.path(), "s.toml", UNIFORM);
    let out = gradiometer(
        &["simulate", "--scenario", scenario.to_str().unwrap()],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let text = fs::read_to_string(dir.path().join("shots.csv")).unwrap();
    assert!(text.lines().any(|l| l == SHOT_HEADER.join(",")));
    assert!(text.contains("# seed=11"));
    assert!(text.contains("# config_sha256="));
    let (meta, shots) = read_shot_table(text.as_bytes()).unwrap();
    assert_eq!(shots.len(), 10);
    assert!(shots
        .iter()
        .all(|s| s.fz.iter().all(|f| (-1.0..=1.0).contains(f))));
    assert_eq!(meta.get("seed"), Some("11"));
}

#[test]
fn simulate_is_reproducible_and_seed_sensitive() {
    let dir = TempDir::new().unwrap();
    let scenario = write(dir.path(), "s.toml", UNIFORM);
    let s = scenario.to_str().unwrap();
    let run = |seed: &str, sub: &str| {
        let out_dir = dir.path().join(sub);
        let out = gradiometer(&["simulate", "--scenario", s, "--seed", seed], &out_dir);
        assert!(out.status.success());
        fs::read(out_dir.join("shots.csv")).unwrap()
    };
    assert_eq!(run("4", "a"), run("4", "b"));
    assert_ne!(run("4", "a"), run("5", "c"));
}

#[test]
fn demonstration_scenario_row_count_and_json_format() {
    let dir = TempDir::new().unwrap();
    let scenario = write(dir.path(), "demo.toml", &demo_config().to_toml());
    let s = scenario.to_str().unwrap();
    let out = gradiometer(&["simulate", "--scenario", s], dir.path());
    assert!(out.status.success());
    let (_, shots) =
        read_shot_table(fs::File::open(dir.path().join("shots.csv")).unwrap()).unwrap();
    assert_eq!(shots.len(), 14 * 24);

    let out = gradiometer(
        &["simulate", "--scenario", s, "--format", "json"],
        dir.path(),
    );
    assert!(out.status.success());
    let v = json(dir.path().join("shots.json"));
    assert_eq!(v["shots"].as_array().unwrap().len(), 14 * 24);
    assert!(v["metadata"]["config_sha256"].is_string());
}

#[test]
fn missing_bias_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let scenario = write(
        dir.path(),
        "s.toml",
        "[baseline]\naxis = \"z'\"\nseparation_um = 840\n",
    );
    let out = gradiometer(
        &["simulate", "--scenario", scenario.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bias"));
}

#[test]
fn unknown_scenario_key_reports_its_line() {
    let dir = TempDir::new().unwrap();
    let text = UNIFORM.replace("magnitude_uT = 50", "magnitude_uT = 50\nmagnitude_mT = 1");
    let scenario = write(dir.path(), "s.toml", &text);
    let out = gradiometer(
        &["simulate", "--scenario", scenario.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("magnitude_mT") && err.contains("line"),
        "{err}"
    );
}

#[test]
fn missing_input_file_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let out = gradiometer(
        &["fit-ellipse", "--shots", "/nonexistent/shots.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bad_arguments_exit_as_config_errors() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        gradiometer(&["no-such-command"], dir.path()).status.code(),
        Some(1)
    );
    assert_eq!(
        gradiometer(&["sensitivity", "--atoms", "1e5"], dir.path())
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn fit_ellipse_recovers_the_demonstration_gradient() {
    let dir = TempDir::new().unwrap();
    let scenario = write(dir.path(), "demo.toml", &demo_config().to_toml());
    assert!(gradiometer(
        &["simulate", "--scenario", scenario.to_str().unwrap()],
        dir.path()
    )
    .status
    .success());
    let shots = dir.path().join("shots.csv");
    let out = gradiometer(
        &["fit-ellipse", "--shots", shots.to_str().unwrap()],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let report = json(dir.path().join("gradient.json"));
    let value = report["value_nT_per_mm"].as_f64().unwrap();
    let sigma = report["sigma_nT_per_mm"].as_f64().unwrap();
    assert!((value + 53.3).abs() <= 3.0 * sigma, "{value} ± {sigma}");
    let phases = fs::read_to_string(dir.path().join("phases.csv")).unwrap();
    assert_eq!(phases.lines().filter(|l| !l.starts_with('#')).count(), 15);
}

#[test]
fn tensor_from_reference_measurements() {
    let dir = TempDir::new().unwrap();
    let m = write(dir.path(), "m.csv", PRINTED);
    let out = gradiometer(
        &["tensor", "--measurements", m.to_str().unwrap()],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(dir.path().join("tensor.json"));
    let raw = &v["raw"]["nT_per_mm"];
    let col: Vec<f64> = (0..3).map(|i| raw[i][1].as_f64().unwrap()).collect();
    for (got, want) in col.iter().zip([-69.2, 151.8, 26.6]) {
        assert!((got - want).abs() < 0.05, "{col:?}");
    }
    assert_eq!(raw[0][2].as_f64(), Some(147.0));
    assert_eq!(raw[2][0].as_f64(), Some(149.5));
    assert!((v["asymmetry_nT_per_mm"].as_f64().unwrap() - 2.5).abs() < 1e-9);
    assert!(v["bearing"]["direction"].is_array());
    assert_eq!(v["inferred_mask"][1][1], Value::Bool(true));
}

#[test]
fn tensor_of_zero_inputs_is_zero() {
    let dir = TempDir::new().unwrap();
    let zeros: String = PRINTED
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i == 0 {
                l.to_string()
            } else {
                let f: Vec<&str> = l.split(',').collect();
                format!("{},{},0,0.1", f[0], f[1])
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    let m = write(dir.path(), "m.csv", &zeros);
    let out = gradiometer(
        &["tensor", "--measurements", m.to_str().unwrap()],
        dir.path(),
    );
    assert!(out.status.success());
    let v = json(dir.path().join("tensor.json"));
    for row in v["raw"]["nT_per_mm"].as_array().unwrap() {
        assert!(row
            .as_array()
            .unwrap()
            .iter()
            .all(|x| x.as_f64() == Some(0.0)));
    }
    assert!(v["bearing"].is_null());
    assert!(v["bearing_error"].is_string());
}

#[test]
fn missing_component_exits_with_degenerate_status() {
    let dir = TempDir::new().unwrap();
    let partial: String = PRINTED
        .lines()
        .filter(|l| !l.starts_with("y,z"))
        .collect::<Vec<_>>()
        .join("\n");
    let m = write(dir.path(), "m.csv", &partial);
    let out = gradiometer(
        &["tensor", "--measurements", m.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing"));
}

#[test]
fn localize_reports_a_unit_bearing() {
    let dir = TempDir::new().unwrap();
    let m = write(dir.path(), "m.csv", PRINTED);
    let out = gradiometer(
        &["localize", "--measurements", m.to_str().unwrap()],
        dir.path(),
    );
    assert!(out.status.success());
    let v = json(dir.path().join("bearing.json"));
    let d: Vec<f64> = v["bearing"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert!((d.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn tensor_from_six_simulated_shot_tables() {
    let dir = TempDir::new().unwrap();
    let mut tables = Vec::new();
    for bias in ["x", "y", "z"] {
        for baseline in ["x'", "z'"] {
            let text = format!(
                "[bias]\naxis = \"{bias}\"\nmagnitude_uT = 50\n\n[baseline]\naxis = \"{baseline}\"\nseparation_um = 840\n\n\
                 [sequence]\nT_min_ms = 0.2\nT_max_ms = 3.0\nn_T = 14\n\n[analysis]\nbootstrap_resamples = 40\n\n\
                 [[source]]\nkind = \"linear_gradient\"\nfield_uT = [0, 0, 0]\n\
                 gradient_nT_per_mm = [[-40, 30, 55], [30, 15, -35], [55, -35, 25]]\n"
            );
            let name = format!("{bias}{}", baseline.trim_end_matches('\''));
            let scenario = write(dir.path(), &format!("{name}.toml"), &text);
            let out_dir = dir.path().join(&name);
            let out = gradiometer(
                &["simulate", "--scenario", scenario.to_str().unwrap()],
                &out_dir,
            );
            assert!(out.status.success());
            tables.push(out_dir.join("shots.csv").to_string_lossy().into_owned());
        }
    }
    let mut args = vec!["tensor", "--shots"];
    args.extend(tables.iter().map(String::as_str));
    let out = gradiometer(&args, dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(dir.path().join("tensor.json"));
    let want = [
        [-40.0, 30.0, 55.0],
        [30.0, 15.0, -35.0],
        [55.0, -35.0, 25.0],
    ];
    for i in 0..3 {
        for j in 0..3 {
            let got = v["raw"]["nT_per_mm"][i][j].as_f64().unwrap();
            let sigma = v["sigma"]["nT_per_mm"][i][j].as_f64().unwrap();
            assert!(
                (got - want[i][j]).abs() <= 5.0 * sigma.max(0.01),
                "({i},{j}) {got} ± {sigma}"
            );
        }
    }
}

#[test]
fn sensitivity_report() {
    let dir = TempDir::new().unwrap();
    let out = gradiometer(
        &[
            "sensitivity",
            "--atoms",
            "1e5",
            "--T-ms",
            "3",
            "--T-shot-s",
            "25",
            "--kappa",
            "3",
            "--volume-mm3",
            "2e-5",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(dir.path().join("sensitivity.json"));
    let sql = v["sql_T_per_rt_Hz"].as_f64().unwrap();
    assert!((sql / 360e-12 - 1.0).abs() < 0.03, "{v}");
}

#[test]
fn reproduce_list_does_not_run_checks() {
    let dir = TempDir::new().unwrap();
    let out = gradiometer(&["reproduce-paper", "--list"], dir.path());
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 8);
    assert!(fs::read_dir(dir.path()).unwrap().next().is_none());
}
