//! TOML scenario files with unit-suffixed fields.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constants::{
    MICROMETER, MICROTESLA, MILLIMETER, MILLISECOND, NANOTESLA, NT_PER_MM, STANDARD_GRAVITY,
};
use crate::ellipse::FitOptions;
use crate::error::{Error, Result};
use crate::fieldmodel::{CoilLoop, CoilPair, FieldScene, FieldSource, DEFAULT_COIL_SEGMENTS};
use crate::pipeline::{Baseline, Bias, Scenario};
use crate::spinsim::NoiseModel;

/// A direction given by name (`"x"`, `"-y"`, `"x'"`, `"z'"`) or as a vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisSpec {
    Named(String),
    Vector([f64; 3]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasConfig {
    pub axis: AxisSpec,
    #[serde(rename = "magnitude_uT")]
    pub magnitude_ut: f64,
    #[serde(rename = "range_uT", default = "default_bias_range")]
    pub range_ut: [f64; 2],
}

fn default_bias_range() -> [f64; 2] {
    [30.0, 60.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub axis: AxisSpec,
    pub separation_um: f64,
    #[serde(default)]
    pub midpoint_mm: [f64; 3],
}

/// In-plane angles of the beam axes, measured from x̂ towards ẑ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamFrameConfig {
    #[serde(default = "default_x_prime")]
    pub x_prime_deg: f64,
    #[serde(default = "default_z_prime")]
    pub z_prime_deg: f64,
}

fn default_x_prime() -> f64 {
    -45.0
}
fn default_z_prime() -> f64 {
    45.0
}

impl Default for BeamFrameConfig {
    fn default() -> Self {
        Self {
            x_prime_deg: default_x_prime(),
            z_prime_deg: default_z_prime(),
        }
    }
}

impl BeamFrameConfig {
    pub fn direction(angle_deg: f64) -> Vector3<f64> {
        let a = angle_deg.to_radians();
        Vector3::new(a.cos(), 0.0, a.sin())
    }

    pub fn x_prime(&self) -> Vector3<f64> {
        Self::direction(self.x_prime_deg)
    }

    pub fn z_prime(&self) -> Vector3<f64> {
        Self::direction(self.z_prime_deg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceConfig {
    /// Explicit interrogation times; otherwise `n_T` values from `T_min_ms` to `T_max_ms`.
    #[serde(rename = "T_ms", default)]
    pub t_ms: Option<Vec<f64>>,
    #[serde(rename = "T_min_ms", default)]
    pub t_min_ms: Option<f64>,
    #[serde(rename = "T_max_ms", default)]
    pub t_max_ms: Option<f64>,
    #[serde(rename = "n_T", default)]
    pub n_t: Option<usize>,
    /// Explicit second-pulse phases; otherwise `phi_count` evenly spaced over 2π.
    #[serde(default)]
    pub phi_rad: Option<Vec<f64>>,
    #[serde(default = "default_phi_count")]
    pub phi_count: usize,
    #[serde(default)]
    pub pre_pulse_delay_ms: f64,
    #[serde(default = "default_gravity")]
    pub gravity_m_per_s2: f64,
    #[serde(default = "default_gravity_axis")]
    pub gravity_axis: AxisSpec,
    #[serde(rename = "reference_detuning_Hz", default)]
    pub reference_detuning_hz: f64,
    #[serde(default)]
    pub pulse_area_error: f64,
}

fn default_phi_count() -> usize {
    24
}
fn default_gravity() -> f64 {
    STANDARD_GRAVITY
}
fn default_gravity_axis() -> AxisSpec {
    AxisSpec::Named("-y".into())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default = "default_atoms")]
    pub atoms_per_cloud: u64,
    #[serde(default = "default_true")]
    pub projection: bool,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(rename = "common_noise_nT", default)]
    pub common_noise_nt: f64,
}

fn default_atoms() -> u64 {
    50_000
}
fn default_true() -> bool {
    true
}
fn default_kappa() -> f64 {
    3.0
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            atoms_per_cloud: default_atoms(),
            projection: true,
            kappa: default_kappa(),
            common_noise_nt: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
    #[serde(default)]
    pub sign_hint: Option<f64>,
    #[serde(default)]
    pub refine: bool,
    #[serde(default = "default_spread")]
    pub min_spread_factor: f64,
}

fn default_resamples() -> usize {
    200
}
fn default_spread() -> f64 {
    3.0
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            bootstrap_resamples: default_resamples(),
            sign_hint: None,
            refine: false,
            min_spread_factor: default_spread(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[allow(non_snake_case)]
pub enum SourceConfig {
    Uniform {
        #[serde(rename = "field_uT")]
        field_ut: [f64; 3],
    },
    /// Rows are field components, columns derivative directions.
    LinearGradient {
        #[serde(rename = "field_uT", default)]
        field_ut: [f64; 3],
        gradient_nT_per_mm: [[f64; 3]; 3],
        #[serde(default)]
        origin_mm: [f64; 3],
        #[serde(default)]
        allow_non_maxwell: bool,
    },
    Dipole {
        moment_A_m2: [f64; 3],
        position_mm: [f64; 3],
    },
    CoilLoop {
        center_mm: [f64; 3],
        normal: [f64; 3],
        radius_mm: f64,
        current_A: f64,
        #[serde(default = "default_segments")]
        segments: usize,
    },
    CoilPair {
        center_mm: [f64; 3],
        axis: [f64; 3],
        radius_mm: f64,
        separation_mm: f64,
        current_A: f64,
        #[serde(default)]
        opposed: bool,
        #[serde(default = "default_segments")]
        segments: usize,
    },
}

fn default_segments() -> usize {
    DEFAULT_COIL_SEGMENTS
}

/// Top-level scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub bias: Option<BiasConfig>,
    #[serde(default)]
    pub baseline: Option<BaselineConfig>,
    #[serde(default)]
    pub beam_frame: BeamFrameConfig,
    #[serde(default)]
    pub sequence: Option<SequenceConfig>,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(rename = "source", default)]
    pub sources: Vec<SourceConfig>,
}

fn mm(v: [f64; 3]) -> Vector3<f64> {
    Vector3::from(v) * MILLIMETER
}

fn unit(v: Vector3<f64>, field: &str) -> Result<Vector3<f64>> {
    let n = v.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::config(
            field,
            "direction must be a finite non-zero vector",
        ));
    }
    Ok(v / n)
}

impl AxisSpec {
    /// Resolves to a unit vector and a frame label.
    pub fn resolve(&self, frame: &BeamFrameConfig, field: &str) -> Result<(Vector3<f64>, String)> {
        match self {
            AxisSpec::Vector(v) => Ok((unit(Vector3::from(*v), field)?, "custom".into())),
            AxisSpec::Named(name) => {
                let trimmed = name.trim();
                let (sign, label) = match trimmed.strip_prefix('-') {
                    Some(rest) => (-1.0, rest),
                    None => (1.0, trimmed.strip_prefix('+').unwrap_or(trimmed)),
                };
                let v = match label {
                    "x" => Vector3::x(),
                    "y" => Vector3::y(),
                    "z" => Vector3::z(),
                    "x'" => frame.x_prime(),
                    "z'" => frame.z_prime(),
                    other => {
                        return Err(Error::config(
                            field,
                            format!("unknown axis '{other}' (expected x, y, z, x' or z')"),
                        ))
                    }
                };
                Ok((sign * v, label.to_string()))
            }
        }
    }
}

impl SourceConfig {
    pub fn build(&self, index: usize) -> Result<FieldSource> {
        let field = format!("source[{index}]");
        let wrap = |e: Error| match e {
            Error::InvalidInput(m) => Error::config(&field, m),
            other => other,
        };
        match self {
            SourceConfig::Uniform { field_ut } => {
                Ok(FieldSource::uniform(Vector3::from(*field_ut) * MICROTESLA))
            }
            SourceConfig::LinearGradient {
                field_ut,
                gradient_nT_per_mm,
                origin_mm,
                allow_non_maxwell,
            } => {
                let g = Matrix3::from_fn(|i, j| gradient_nT_per_mm[i][j] * NT_PER_MM);
                let b = Vector3::from(*field_ut) * MICROTESLA;
                if *allow_non_maxwell {
                    Ok(FieldSource::unchecked_linear_gradient(b, g, mm(*origin_mm)))
                } else {
                    FieldSource::linear_gradient(b, g, mm(*origin_mm)).map_err(wrap)
                }
            }
            SourceConfig::Dipole {
                moment_A_m2,
                position_mm,
            } => Ok(FieldSource::dipole(
                Vector3::from(*moment_A_m2),
                mm(*position_mm),
            )),
            SourceConfig::CoilLoop {
                center_mm,
                normal,
                radius_mm,
                current_A,
                segments,
            } => CoilLoop::new(
                mm(*center_mm),
                Vector3::from(*normal),
                radius_mm * MILLIMETER,
                *current_A,
                *segments,
            )
            .map(FieldSource::CoilLoop)
            .map_err(wrap),
            SourceConfig::CoilPair {
                center_mm,
                axis,
                radius_mm,
                separation_mm,
                current_A,
                opposed,
                segments,
            } => CoilPair::new(
                mm(*center_mm),
                Vector3::from(*axis),
                radius_mm * MILLIMETER,
                separation_mm * MILLIMETER,
                *current_A,
                *opposed,
                *segments,
            )
            .map(FieldSource::CoilPair)
            .map_err(wrap),
        }
    }
}

impl SequenceConfig {
    pub fn times(&self) -> Result<Vec<f64>> {
        let ms = if let Some(list) = &self.t_ms {
            list.clone()
        } else {
            let (lo, hi, n) = match (self.t_min_ms, self.t_max_ms, self.n_t) {
                (Some(lo), Some(hi), Some(n)) => (lo, hi, n),
                _ => {
                    return Err(Error::config(
                        "sequence.T_ms",
                        "give T_ms, or all of T_min_ms, T_max_ms and n_T",
                    ))
                }
            };
            if n < 2 || !(hi > lo) {
                return Err(Error::config(
                    "sequence.n_T",
                    "need n_T >= 2 and T_max_ms > T_min_ms",
                ));
            }
            (0..n)
                .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
                .collect()
        };
        if ms.is_empty() || ms.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(Error::config(
                "sequence.T_ms",
                "times must be finite and non-negative",
            ));
        }
        Ok(ms.into_iter().map(|t| t * MILLISECOND).collect())
    }

    pub fn phases(&self) -> Result<Vec<f64>> {
        if let Some(list) = &self.phi_rad {
            return Ok(list.clone());
        }
        if self.phi_count == 0 {
            return Err(Error::config("sequence.phi_count", "must be positive"));
        }
        Ok(evenly_spaced_phases(self.phi_count))
    }
}

/// `m` phases k·2π/m.
pub fn evenly_spaced_phases(m: usize) -> Vec<f64> {
    (0..m).map(|k| 2.0 * PI * k as f64 / m as f64).collect()
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config("scenario", e.to_string().trim_end()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario configs always serialize")
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn build(&self) -> Result<Scenario> {
        let bias_cfg = self
            .bias
            .as_ref()
            .ok_or_else(|| Error::config("bias", "missing [bias] section"))?;
        let baseline_cfg = self
            .baseline
            .as_ref()
            .ok_or_else(|| Error::config("baseline", "missing [baseline] section"))?;
        let seq = self
            .sequence
            .as_ref()
            .ok_or_else(|| Error::config("sequence", "missing [sequence] section"))?;

        let [lo, hi] = bias_cfg.range_ut;
        if !(bias_cfg.magnitude_ut >= lo && bias_cfg.magnitude_ut <= hi) {
            return Err(Error::config(
                "bias.magnitude_uT",
                format!(
                    "{} µT outside the configured range [{lo}, {hi}] µT",
                    bias_cfg.magnitude_ut
                ),
            ));
        }
        let (bias_axis, _) = bias_cfg.axis.resolve(&self.beam_frame, "bias.axis")?;
        let (axis, frame) = baseline_cfg
            .axis
            .resolve(&self.beam_frame, "baseline.axis")?;
        if !(baseline_cfg.separation_um > 0.0) {
            return Err(Error::config("baseline.separation_um", "must be positive"));
        }
        let angle = (self.beam_frame.x_prime().dot(&self.beam_frame.z_prime()))
            .clamp(-1.0, 1.0)
            .acos()
            .to_degrees();
        if angle < 5.0 || angle > 175.0 {
            return Err(Error::config(
                "beam_frame",
                "beam axes are within 5° of parallel",
            ));
        }

        let sources = self
            .sources
            .iter()
            .enumerate()
            .map(|(i, s)| s.build(i))
            .collect::<Result<Vec<_>>>()?;
        let scene = FieldScene::new(sources)
            .with_common_noise(self.noise.common_noise_nt * NANOTESLA)
            .map_err(|e| Error::config("noise.common_noise_nT", e.to_string()))?;

        let (g_axis, _) = seq
            .gravity_axis
            .resolve(&self.beam_frame, "sequence.gravity_axis")?;
        let noise = NoiseModel {
            n_atoms: self.noise.atoms_per_cloud,
            projection_noise: self.noise.projection,
            kappa: self.noise.kappa,
            seed: self.seed.unwrap_or(0),
        };
        noise
            .validate()
            .map_err(|e| Error::config("noise", e.to_string()))?;
        let fit = FitOptions {
            min_spread_factor: self.analysis.min_spread_factor,
            refine: self.analysis.refine,
            ..FitOptions::default()
        }
        .with_noise_floor(noise.fz_noise_floor());

        let scenario = Scenario {
            scene,
            bias: Bias {
                axis: bias_axis,
                magnitude: bias_cfg.magnitude_ut * MICROTESLA,
            },
            baseline: Baseline {
                axis,
                separation: baseline_cfg.separation_um * MICROMETER,
                frame,
                midpoint: mm(baseline_cfg.midpoint_mm),
            },
            t_list: seq.times()?,
            phi_list: seq.phases()?,
            noise,
            gravity: g_axis * seq.gravity_m_per_s2,
            pre_pulse_delay: seq.pre_pulse_delay_ms * MILLISECOND,
            reference_detuning: 2.0 * PI * seq.reference_detuning_hz,
            pulse_area_error: seq.pulse_area_error,
            fit,
            n_resamples: self.analysis.bootstrap_resamples,
            sign_hint: self.analysis.sign_hint,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Gradient of the demonstration data set, nT/mm along the ẑ′ beam axis.
pub const DEMO_GRADIENT_NT_PER_MM: f64 = -53.3;
pub const DEMO_SEPARATION_UM: f64 = 840.0;

/// Symmetric traceless gradient with ∂B_y/∂z′ = −53.3 nT/mm, measured along ẑ′
/// with a 840 µm baseline, 50 µT bias along ŷ, κ = 3 noise on 5×10⁴ atoms per
/// cloud, 14 interrogation times up to 3 ms and 24 phases per ellipse.
pub fn demo_config() -> ScenarioConfig {
    let g = DEMO_GRADIENT_NT_PER_MM / 2f64.sqrt();
    ScenarioConfig {
        seed: Some(20_190_812),
        bias: Some(BiasConfig {
            axis: AxisSpec::Named("y".into()),
            magnitude_ut: 50.0,
            range_ut: default_bias_range(),
        }),
        baseline: Some(BaselineConfig {
            axis: AxisSpec::Named("z'".into()),
            separation_um: DEMO_SEPARATION_UM,
            midpoint_mm: [0.0; 3],
        }),
        beam_frame: BeamFrameConfig::default(),
        sequence: Some(SequenceConfig {
            t_ms: Some((1..=14).map(|k| 3.0 * k as f64 / 14.0).collect()),
            t_min_ms: None,
            t_max_ms: None,
            n_t: None,
            phi_rad: None,
            phi_count: 24,
            pre_pulse_delay_ms: 0.0,
            gravity_m_per_s2: STANDARD_GRAVITY,
            gravity_axis: default_gravity_axis(),
            reference_detuning_hz: 0.0,
            pulse_area_error: 0.0,
        }),
        noise: NoiseConfig::default(),
        analysis: AnalysisConfig::default(),
        sources: vec![SourceConfig::LinearGradient {
            field_ut: [0.0; 3],
            gradient_nT_per_mm: [[0.0, g, 0.0], [g, 0.0, g], [0.0, g, 0.0]],
            origin_mm: [0.0; 3],
            allow_non_maxwell: false,
        }],
    }
}
