//! CSV shot and phase tables, measurement files and JSON reports.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::constants::NT_PER_MM;
use crate::error::{Error, Result};
use crate::pipeline::{
    Bearing, GradientMeasurement, GradientTensor, NullingAdvice, SweepResult, UnwrappedPoint,
};
use crate::scenario::BeamFrameConfig;
use crate::spinsim::Shot;

pub const SHOT_HEADER: [&str; 11] = [
    "shot_id", "T_s", "phi_rad", "N_m1_c1", "N_0_c1", "N_p1_c1", "N_m1_c2", "N_0_c2", "N_p1_c2",
    "Fz_c1", "Fz_c2",
];

/// `# key=value` lines written above CSV tables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata(pub BTreeMap<String, String>);

impl Metadata {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.set(key, value);
        self
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.0.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| {
                Error::invalid(format!("metadata `{key}` has unparsable value `{v}`"))
            }),
        }
    }

    pub fn vector(&self, key: &str) -> Result<Option<Vector3<f64>>> {
        let Some(v) = self.get(key) else {
            return Ok(None);
        };
        let parts: Vec<f64> = v
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::invalid(format!("metadata `{key}` is not a vector")))?;
        if parts.len() != 3 {
            return Err(Error::invalid(format!(
                "metadata `{key}` needs three numbers"
            )));
        }
        Ok(Some(Vector3::new(parts[0], parts[1], parts[2])))
    }

    pub fn vector_string(v: &Vector3<f64>) -> String {
        format!("{} {} {}", v.x, v.y, v.z)
    }

    fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        for (k, v) in &self.0 {
            writeln!(w, "# {k}={v}")?;
        }
        Ok(())
    }
}

/// Splits leading `#` lines off a table.
fn split_metadata<R: Read>(reader: R) -> Result<(Metadata, String)> {
    let mut meta = Metadata::new();
    let mut body = String::new();
    for line in BufReader::new(reader).lines() {
        let line = line?;
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once('=') {
                meta.set(k.trim(), v.trim());
            }
        } else {
            body.push_str(&line);
            body.push('\n');
        }
    }
    Ok((meta, body))
}

pub fn write_shot_table<W: Write>(mut w: W, meta: &Metadata, shots: &[Shot]) -> Result<()> {
    meta.write_to(&mut w)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(SHOT_HEADER)?;
    for (i, s) in shots.iter().enumerate() {
        let mut row = vec![i.to_string(), s.t.to_string(), s.phi.to_string()];
        row.extend(s.populations.iter().flatten().map(f64::to_string));
        row.push(s.fz[0].to_string());
        row.push(s.fz[1].to_string());
        csv.write_record(&row)?;
    }
    csv.flush()?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct ShotRow {
    #[allow(dead_code)]
    shot_id: u64,
    #[serde(rename = "T_s")]
    t: f64,
    phi_rad: f64,
    #[serde(rename = "N_m1_c1")]
    m1_c1: f64,
    #[serde(rename = "N_0_c1")]
    z_c1: f64,
    #[serde(rename = "N_p1_c1")]
    p1_c1: f64,
    #[serde(rename = "N_m1_c2")]
    m1_c2: f64,
    #[serde(rename = "N_0_c2")]
    z_c2: f64,
    #[serde(rename = "N_p1_c2")]
    p1_c2: f64,
    #[serde(rename = "Fz_c1")]
    fz_c1: f64,
    #[serde(rename = "Fz_c2")]
    fz_c2: f64,
}

pub fn read_shot_table<R: Read>(reader: R) -> Result<(Metadata, Vec<Shot>)> {
    let (meta, body) = split_metadata(reader)?;
    let mut csv = csv::Reader::from_reader(body.as_bytes());
    let mut shots = Vec::new();
    for row in csv.deserialize() {
        let r: ShotRow = row?;
        shots.push(Shot {
            t: r.t,
            phi: r.phi_rad,
            populations: [[r.m1_c1, r.z_c1, r.p1_c1], [r.m1_c2, r.z_c2, r.p1_c2]],
            fz: [r.fz_c1, r.fz_c2],
            common_noise_draw: 0.0,
        });
    }
    Ok((meta, shots))
}

/// Per-T phase table; `unwrapped` adds the signed phase where available.
pub fn write_phase_table<W: Write>(
    mut w: W,
    meta: &Metadata,
    sweep: &SweepResult,
    unwrapped: &[UnwrappedPoint],
) -> Result<()> {
    meta.write_to(&mut w)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record([
        "T_s",
        "abs_dphi_rad",
        "sigma_rad",
        "dphi_unwrapped_rad",
        "degenerate",
    ])?;
    for p in &sweep.points {
        let un = unwrapped
            .iter()
            .find(|u| u.t == p.t)
            .map_or(String::new(), |u| u.dphi.to_string());
        let (v, s) = p.estimate.map_or((String::new(), String::new()), |e| {
            (e.abs_dphi.to_string(), e.sigma.to_string())
        });
        csv.write_record([
            p.t.to_string(),
            v,
            s,
            un,
            p.degenerate.clone().unwrap_or_default(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct MeasurementRow {
    component: String,
    derivative: String,
    #[serde(rename = "value_nT_per_mm")]
    value: f64,
    #[serde(rename = "sigma_nT_per_mm")]
    sigma: f64,
    #[serde(default)]
    bias_sign: Option<f64>,
}

/// Reads `component,derivative,value_nT_per_mm,sigma_nT_per_mm[,bias_sign]` rows,
/// where `derivative` is one of x, z, x', z'.
pub fn read_measurements<R: Read>(
    reader: R,
    frame: &BeamFrameConfig,
) -> Result<Vec<GradientMeasurement>> {
    let (_, body) = split_metadata(reader)?;
    let mut csv = csv::Reader::from_reader(body.as_bytes());
    let mut out = Vec::new();
    for row in csv.deserialize() {
        let r: MeasurementRow = row?;
        let component = match r.component.trim() {
            "x" => 0,
            "y" => 1,
            "z" => 2,
            other => return Err(Error::invalid(format!("unknown field component `{other}`"))),
        };
        let derivative = r.derivative.trim();
        let direction = match derivative {
            "x" => Vector3::x(),
            "z" => Vector3::z(),
            "x'" => frame.x_prime(),
            "z'" => frame.z_prime(),
            other => {
                return Err(Error::invalid(format!(
                    "derivative `{other}` must be one of x, z, x', z'"
                )))
            }
        };
        if !(r.sigma >= 0.0) {
            return Err(Error::invalid("measurement sigma must be non-negative"));
        }
        out.push(GradientMeasurement {
            component,
            direction,
            baseline_frame: derivative.to_string(),
            value: r.value * NT_PER_MM,
            sigma: r.sigma * NT_PER_MM,
            bias_sign: r.bias_sign.unwrap_or(1.0),
        });
    }
    Ok(out)
}

fn rows(m: &Matrix3<f64>, scale: f64) -> [[f64; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)] * scale))
}

fn vec3(v: &Vector3<f64>, scale: f64) -> [f64; 3] {
    [v.x * scale, v.y * scale, v.z * scale]
}

/// A 3×3 tensor as rows, in T/m and nT/mm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorBlock {
    #[serde(rename = "T_per_m")]
    pub t_per_m: [[f64; 3]; 3],
    #[serde(rename = "nT_per_mm")]
    pub nt_per_mm: [[f64; 3]; 3],
}

impl TensorBlock {
    pub fn new(m: &Matrix3<f64>) -> Self {
        Self {
            t_per_m: rows(m, 1.0),
            nt_per_mm: rows(m, 1.0 / NT_PER_MM),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BearingBlock {
    pub direction: [f64; 3],
    #[serde(rename = "eigenvalues_nT_per_mm")]
    pub eigenvalues_nt_per_mm: [f64; 3],
    pub eigenvectors: [[f64; 3]; 3],
    pub relative_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasDirectionBlock {
    pub label: String,
    pub direction: [f64; 3],
    #[serde(rename = "grad_B_nT_per_mm")]
    pub grad_b_nt_per_mm: [f64; 3],
    #[serde(rename = "magnitude_nT_per_mm")]
    pub magnitude_nt_per_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullingBlock {
    /// Eigenaxes as rows.
    pub eigenaxes: [[f64; 3]; 3],
    #[serde(rename = "eigenvalues_nT_per_mm")]
    pub eigenvalues_nt_per_mm: [f64; 3],
    #[serde(rename = "corrections_nT_per_mm")]
    pub corrections_nt_per_mm: [f64; 3],
    pub bias_directions: Vec<BiasDirectionBlock>,
    pub magnitude_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorReport {
    pub metadata: Metadata,
    pub raw: TensorBlock,
    pub symmetric: TensorBlock,
    pub sigma: TensorBlock,
    pub inferred_mask: [[bool; 3]; 3],
    pub asymmetry_t_per_m: f64,
    #[serde(rename = "asymmetry_nT_per_mm")]
    pub asymmetry_nt_per_mm: f64,
    #[serde(rename = "asymmetry_sigma_nT_per_mm")]
    pub asymmetry_sigma_nt_per_mm: f64,
    /// Absent when the largest eigenvalues are degenerate.
    pub bearing: Option<BearingBlock>,
    pub bearing_error: Option<String>,
    pub nulling: NullingBlock,
}

impl TensorReport {
    pub fn new(
        metadata: Metadata,
        tensor: &GradientTensor,
        bearing: Result<Bearing>,
        advice: &NullingAdvice,
    ) -> Self {
        let k = 1.0 / NT_PER_MM;
        let (bearing, bearing_error) = match bearing {
            Ok(b) => (
                Some(BearingBlock {
                    direction: vec3(&b.direction, 1.0),
                    eigenvalues_nt_per_mm: vec3(&b.eigenvalues, k),
                    eigenvectors: rows(&b.eigenvectors.transpose(), 1.0),
                    relative_gap: b.relative_gap,
                }),
                None,
            ),
            Err(e) => (None, Some(e.to_string())),
        };
        Self {
            metadata,
            raw: TensorBlock::new(&tensor.raw),
            symmetric: TensorBlock::new(&tensor.symmetric),
            sigma: TensorBlock::new(&tensor.sigma),
            inferred_mask: tensor.inferred_mask,
            asymmetry_t_per_m: tensor.asymmetry,
            asymmetry_nt_per_mm: tensor.asymmetry * k,
            asymmetry_sigma_nt_per_mm: tensor.asymmetry_sigma * k,
            bearing,
            bearing_error,
            nulling: NullingBlock {
                eigenaxes: rows(&advice.eigenaxes.transpose(), 1.0),
                eigenvalues_nt_per_mm: vec3(&advice.eigenvalues, k),
                corrections_nt_per_mm: vec3(&advice.corrections, k),
                bias_directions: advice
                    .bias_directions
                    .iter()
                    .map(|b| BiasDirectionBlock {
                        label: b.label.clone(),
                        direction: vec3(&b.direction, 1.0),
                        grad_b_nt_per_mm: vec3(&b.grad_b, k),
                        magnitude_nt_per_mm: b.magnitude * k,
                    })
                    .collect(),
                magnitude_ratio: advice.magnitude_ratio,
            },
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_json<W: Write, T: Serialize>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}
