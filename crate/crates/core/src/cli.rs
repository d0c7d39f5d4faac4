//! Command-line front end for the `gradiometer` binary.

use std::ffi::OsString;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::constants::{MILLISECOND, NT_PER_MM};
use crate::ellipse::FitOptions;
use crate::error::{Error, Result};
use crate::io::{
    read_measurements, read_shot_table, write_json, write_phase_table, write_shot_table, Metadata,
    TensorReport,
};
use crate::pipeline::{
    analyze_shots, complete_tensor, dipole_bearing, fit_gradient, grad_nulling_advice,
    phase_series, sign_hint_from_fringes, unwrap, Baseline, GradientFit, GradientMeasurement,
    GradientTensor, InPlaneGradients, SweepResult,
};
use crate::reproduce::{write_bundle, ReproduceOptions, CHECKS};
use crate::scenario::{BeamFrameConfig, ScenarioConfig};
use crate::sensitivity::{self, SensitivityParams};

#[derive(Debug, Parser)]
#[command(
    name = "gradiometer",
    version,
    about = "Spinor magnetic gradiometry toolkit"
)]
pub struct Cli {
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    /// Master seed; overrides the scenario's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Table format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the scenario's (T, phase) grid and write a shot table.
    Simulate,
    /// Fit one ellipse per interrogation time and convert the slope to a gradient.
    FitEllipse {
        /// Shot table written by `simulate` (or real data in the same layout).
        #[arg(long)]
        shots: PathBuf,
    },
    /// Complete the gradient tensor from six in-plane components.
    Tensor(TensorInputs),
    /// Report the dominant-source bearing of a completed tensor.
    Localize(TensorInputs),
    /// Closed-form sensitivity figures.
    Sensitivity(SensitivityArgs),
    /// Run the reference checks and write a report bundle.
    ReproducePaper {
        /// List the checks without running them.
        #[arg(long)]
        list: bool,
        /// Exit with status 2 if any check fails.
        #[arg(long)]
        strict: bool,
        /// Number of Monte Carlo ellipses for the rejection check.
        #[arg(long, default_value_t = 500)]
        ellipses: usize,
    },
}

#[derive(Debug, Args)]
pub struct TensorInputs {
    /// CSV with columns component,derivative,value_nT_per_mm,sigma_nT_per_mm.
    #[arg(long, conflicts_with = "shots")]
    pub measurements: Option<PathBuf>,
    /// Shot tables, one per measured component and baseline.
    #[arg(long, num_args = 1..)]
    pub shots: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    /// Total atoms per shot.
    #[arg(long)]
    pub atoms: f64,
    /// Interrogation time, ms.
    #[arg(long = "T-ms")]
    pub t_ms: f64,
    /// Repetition period, s.
    #[arg(long = "T-shot-s", conflicts_with = "duty")]
    pub t_shot_s: Option<f64>,
    /// Duty cycle T/T_shot.
    #[arg(long)]
    pub duty: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 1)]
    pub shots: u64,
    /// Sensor volume, mm³.
    #[arg(long = "volume-mm3")]
    pub volume_mm3: Option<f64>,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli, &mut std::io::stdout()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

struct Context {
    config: Option<ScenarioConfig>,
    seed: u64,
    out: PathBuf,
    format: Format,
}

impl Context {
    fn new(cli: &Cli) -> Result<Self> {
        let config = cli
            .scenario
            .as_deref()
            .map(ScenarioConfig::load)
            .transpose()?;
        let seed = cli
            .seed
            .or_else(|| config.as_ref().and_then(|c| c.seed))
            .unwrap_or(0);
        std::fs::create_dir_all(&cli.out)?;
        Ok(Self {
            config,
            seed,
            out: cli.out.clone(),
            format: cli.format,
        })
    }

    fn require_config(&self) -> Result<&ScenarioConfig> {
        self.config
            .as_ref()
            .ok_or_else(|| Error::config("--scenario", "this command needs a scenario file"))
    }

    fn metadata(&self) -> Metadata {
        let mut m = Metadata::new().with("seed", self.seed);
        if let Some(c) = &self.config {
            m.set("config_sha256", c.hash());
        }
        m
    }

    fn frame(&self) -> BeamFrameConfig {
        self.config
            .as_ref()
            .map_or_else(BeamFrameConfig::default, |c| c.beam_frame)
    }

    fn create(&self, name: &str) -> Result<File> {
        Ok(File::create(self.out.join(name))?)
    }
}

/// Runs a parsed command, writing a human-readable summary to `stdout`.
pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<i32> {
    if let Some(n) = cli.threads {
        // A second initialisation in the same process is harmless to ignore.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    if let Command::ReproducePaper { list: true, .. } = cli.command {
        for c in CHECKS {
            writeln!(stdout, "{}  {:<24} {}", c.id, c.name, c.target)?;
        }
        return Ok(0);
    }
    let ctx = Context::new(cli)?;
    match &cli.command {
        Command::Simulate => cmd_simulate(&ctx, stdout),
        Command::FitEllipse { shots } => cmd_fit_ellipse(&ctx, shots, stdout),
        Command::Tensor(inputs) => cmd_tensor(&ctx, inputs, stdout),
        Command::Localize(inputs) => cmd_localize(&ctx, inputs, stdout),
        Command::Sensitivity(args) => cmd_sensitivity(&ctx, args, stdout),
        Command::ReproducePaper {
            strict, ellipses, ..
        } => cmd_reproduce(&ctx, *strict, *ellipses, stdout),
    }
}

fn cmd_simulate(ctx: &Context, stdout: &mut dyn Write) -> Result<i32> {
    let cfg = ctx.require_config()?;
    let scenario = cfg.build()?;
    let shots = scenario.simulate(ctx.seed)?;
    let meta = ctx
        .metadata()
        .with("component", ["x", "y", "z"][scenario.bias.component()])
        .with("bias_sign", scenario.bias.sign())
        .with(
            "baseline_axis",
            Metadata::vector_string(&scenario.baseline.axis),
        )
        .with("baseline_frame", &scenario.baseline.frame)
        .with("separation_m", scenario.baseline.separation)
        .with("noise_floor", scenario.fit.noise_floor);
    let name = match ctx.format {
        Format::Csv => {
            write_shot_table(ctx.create("shots.csv")?, &meta, &shots)?;
            "shots.csv"
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                metadata: &'a Metadata,
                shots: &'a [crate::spinsim::Shot],
            }
            write_json(
                ctx.create("shots.json")?,
                &Out {
                    metadata: &meta,
                    shots: &shots,
                },
            )?;
            "shots.json"
        }
    };
    writeln!(
        stdout,
        "wrote {} shots to {}",
        shots.len(),
        ctx.out.join(name).display()
    )?;
    Ok(0)
}

/// Analysis settings read from a shot table's metadata, falling back to the scenario.
struct TableAnalysis {
    baseline: Baseline,
    component: usize,
    bias_sign: f64,
    fit: FitOptions,
    n_resamples: usize,
    sign_hint: Option<f64>,
}

fn table_analysis(ctx: &Context, meta: &Metadata) -> Result<TableAnalysis> {
    let scenario = ctx.config.as_ref().map(ScenarioConfig::build).transpose()?;
    let missing = |key: &str| {
        Error::config(
            key,
            "not in the shot table metadata and no --scenario given",
        )
    };
    let axis = match meta.vector("baseline_axis")? {
        Some(a) => a,
        None => scenario
            .as_ref()
            .map(|s| s.baseline.axis)
            .ok_or_else(|| missing("baseline_axis"))?,
    };
    let separation = match meta.parse::<f64>("separation_m")? {
        Some(v) => v,
        None => scenario
            .as_ref()
            .map(|s| s.baseline.separation)
            .ok_or_else(|| missing("separation_m"))?,
    };
    let component = match meta.get("component") {
        Some("x") => 0,
        Some("y") => 1,
        Some("z") => 2,
        Some(other) => return Err(Error::invalid(format!("unknown component `{other}`"))),
        None => scenario
            .as_ref()
            .map(|s| s.bias.component())
            .ok_or_else(|| missing("component"))?,
    };
    let bias_sign = match meta.parse::<f64>("bias_sign")? {
        Some(v) => v,
        None => scenario
            .as_ref()
            .map(|s| s.bias.sign())
            .ok_or_else(|| missing("bias_sign"))?,
    };
    let mut fit = scenario
        .as_ref()
        .map_or_else(FitOptions::default, |s| s.fit);
    if let Some(f) = meta.parse::<f64>("noise_floor")? {
        fit.noise_floor = f;
    }
    Ok(TableAnalysis {
        baseline: Baseline {
            axis: axis.normalize(),
            separation,
            frame: meta
                .get("baseline_frame")
                .map(str::to_string)
                .or_else(|| scenario.as_ref().map(|s| s.baseline.frame.clone()))
                .unwrap_or_else(|| "custom".into()),
            midpoint: nalgebra::Vector3::zeros(),
        },
        component,
        bias_sign,
        fit,
        n_resamples: scenario.as_ref().map_or(200, |s| s.n_resamples),
        sign_hint: scenario.as_ref().and_then(|s| s.sign_hint),
    })
}

fn analyze_table(
    ctx: &Context,
    path: &Path,
) -> Result<(
    SweepResult,
    Vec<crate::pipeline::UnwrappedPoint>,
    GradientFit,
)> {
    let (meta, shots) = read_shot_table(File::open(path)?)?;
    let a = table_analysis(ctx, &meta)?;
    let points = analyze_shots(&shots, &a.fit, a.n_resamples, ctx.seed)?;
    let sign_hint = match a.sign_hint {
        Some(s) => s,
        None => {
            let t0 = points.iter().map(|p| p.t).find(|&t| t > 0.0).unwrap_or(0.0);
            let first: Vec<_> = shots.iter().filter(|s| s.t == t0).cloned().collect();
            sign_hint_from_fringes(&first)?
        }
    };
    let sweep = SweepResult { points, sign_hint };
    let unwrapped = unwrap(&phase_series(&sweep), sign_hint)?;
    let fit = fit_gradient(&unwrapped, &a.baseline, a.component, a.bias_sign)?;
    Ok((sweep, unwrapped, fit))
}

fn cmd_fit_ellipse(ctx: &Context, shots: &Path, stdout: &mut dyn Write) -> Result<i32> {
    let (sweep, unwrapped, fit) = analyze_table(ctx, shots)?;
    let meta = ctx.metadata().with("source", shots.display());
    match ctx.format {
        Format::Csv => write_phase_table(ctx.create("phases.csv")?, &meta, &sweep, &unwrapped)?,
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                metadata: &'a Metadata,
                sweep: &'a SweepResult,
                unwrapped: &'a [crate::pipeline::UnwrappedPoint],
            }
            write_json(
                ctx.create("phases.json")?,
                &Out {
                    metadata: &meta,
                    sweep: &sweep,
                    unwrapped: &unwrapped,
                },
            )?
        }
    }
    #[derive(Serialize)]
    struct GradientReport<'a> {
        metadata: &'a Metadata,
        fit: &'a GradientFit,
        #[serde(rename = "value_nT_per_mm")]
        value: f64,
        #[serde(rename = "sigma_nT_per_mm")]
        sigma: f64,
    }
    let m = &fit.measurement;
    write_json(
        ctx.create("gradient.json")?,
        &GradientReport {
            metadata: &meta,
            fit: &fit,
            value: m.value / NT_PER_MM,
            sigma: m.sigma / NT_PER_MM,
        },
    )?;
    let flagged = sweep
        .points
        .iter()
        .filter(|p| p.degenerate.is_some())
        .count();
    writeln!(
        stdout,
        "dB_{}/d{} = {:.3} ± {:.3} nT/mm ({} interrogation times, {} flagged)",
        ["x", "y", "z"][m.component],
        m.baseline_frame,
        m.value / NT_PER_MM,
        m.sigma / NT_PER_MM,
        sweep.points.len(),
        flagged
    )?;
    Ok(0)
}

fn tensor_from_inputs(ctx: &Context, inputs: &TensorInputs) -> Result<GradientTensor> {
    let measurements: Vec<GradientMeasurement> = if let Some(path) = &inputs.measurements {
        read_measurements(File::open(path)?, &ctx.frame())?
    } else if !inputs.shots.is_empty() {
        inputs
            .shots
            .iter()
            .map(|p| analyze_table(ctx, p).map(|(_, _, f)| f.measurement))
            .collect::<Result<_>>()?
    } else {
        return Err(Error::config(
            "--measurements",
            "give a measurement file or shot tables",
        ));
    };
    complete_tensor(&InPlaneGradients::from_measurements(&measurements)?)
}

fn cmd_tensor(ctx: &Context, inputs: &TensorInputs, stdout: &mut dyn Write) -> Result<i32> {
    let tensor = tensor_from_inputs(ctx, inputs)?;
    let report = TensorReport::new(
        ctx.metadata(),
        &tensor,
        dipole_bearing(&tensor.symmetric),
        &grad_nulling_advice(&tensor.symmetric),
    );
    write_json(ctx.create("tensor.json")?, &report)?;
    writeln!(stdout, "gradient tensor (nT/mm), column y inferred:")?;
    for row in report.raw.nt_per_mm {
        writeln!(stdout, "  {:>9.2} {:>9.2} {:>9.2}", row[0], row[1], row[2])?;
    }
    writeln!(stdout, "asymmetry {:.2} nT/mm", report.asymmetry_nt_per_mm)?;
    Ok(0)
}

fn cmd_localize(ctx: &Context, inputs: &TensorInputs, stdout: &mut dyn Write) -> Result<i32> {
    let tensor = tensor_from_inputs(ctx, inputs)?;
    let bearing = dipole_bearing(&tensor.symmetric)?;
    #[derive(Serialize)]
    struct Out {
        metadata: Metadata,
        bearing: [f64; 3],
        #[serde(rename = "eigenvalues_nT_per_mm")]
        eigenvalues: [f64; 3],
        relative_gap: f64,
    }
    let d = bearing.direction;
    let e = bearing.eigenvalues / NT_PER_MM;
    write_json(
        ctx.create("bearing.json")?,
        &Out {
            metadata: ctx.metadata(),
            bearing: [d.x, d.y, d.z],
            eigenvalues: [e.x, e.y, e.z],
            relative_gap: bearing.relative_gap,
        },
    )?;
    writeln!(stdout, "bearing ({:.4}, {:.4}, {:.4})", d.x, d.y, d.z)?;
    Ok(0)
}

fn cmd_sensitivity(ctx: &Context, args: &SensitivityArgs, stdout: &mut dyn Write) -> Result<i32> {
    let t = args.t_ms * MILLISECOND;
    let mut p = match (args.t_shot_s, args.duty) {
        (Some(ts), None) => SensitivityParams::new(args.atoms, t, ts, args.kappa),
        (None, Some(d)) => SensitivityParams::with_duty_cycle(args.atoms, t, d, args.kappa),
        _ => {
            return Err(Error::config(
                "--T-shot-s",
                "give exactly one of --T-shot-s and --duty",
            ))
        }
    };
    p.shots = args.shots;
    p.volume = args.volume_mm3.unwrap_or(0.0) * 1e-9;
    let report = sensitivity::report(&p)?;
    #[derive(Serialize)]
    struct Out<'a> {
        metadata: Metadata,
        #[serde(flatten)]
        report: &'a sensitivity::SensitivityReport,
    }
    write_json(
        ctx.create("sensitivity.json")?,
        &Out {
            metadata: ctx.metadata(),
            report: &report,
        },
    )?;
    writeln!(
        stdout,
        "dB*sqrt(T_int) = {:.4e} T/rtHz",
        report.sql_t_per_rt_hz
    )?;
    if let Some(e) = report.energy_resolution_hbar {
        writeln!(stdout, "energy resolution = {e:.2} hbar")?;
    }
    Ok(0)
}

fn cmd_reproduce(
    ctx: &Context,
    strict: bool,
    ellipses: usize,
    stdout: &mut dyn Write,
) -> Result<i32> {
    let mut opts = ReproduceOptions::new(ctx.seed);
    opts.cmrr_ellipses = ellipses;
    let report = write_bundle(&ctx.out, &opts)?;
    for c in &report.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        let values: Vec<String> = c
            .measured
            .iter()
            .map(|(k, v)| format!("{k}={v:.6}"))
            .collect();
        writeln!(
            stdout,
            "{status} {} {:<24} {}",
            c.id,
            c.name,
            values.join(" ")
        )?;
        if let Some(e) = &c.error {
            writeln!(stdout, "       error: {e}")?;
        }
    }
    writeln!(stdout, "bundle written to {}", ctx.out.display())?;
    Ok(if strict && !report.all_passed { 2 } else { 0 })
}
