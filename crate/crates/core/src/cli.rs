//! Command-line pipeline: generate → fit → simulate → diagnose.
//!
//! Every written file gets a `<file>.meta.json` sidecar with the effective
//! configuration and SHA-256 hashes of the inputs and of the file itself.
//! Nothing time-dependent is recorded, so reruns are byte-identical.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::diagnostics::{diagnose, DiagnosticsConfig, DiagnosticsReport};
use crate::error::{Result, ZnlError};
use crate::kernel::KernelConfig;
use crate::markov::{build_model, sha256_hex, simulate_observed, DomainPolicy, SimulationRun, ZnlModel};
use crate::series::TimeSeries;
use crate::systems::{
    generate_henon, generate_lorenz63, generate_lorenz96, FlowSpec, HenonParams, Lorenz63Params, Lorenz96Params,
};
use crate::transitions::{stationary_measure, DEFAULT_STATIONARY_MAX_ITERS, DEFAULT_STATIONARY_TOL};

pub const SERIES_FILE: &str = "series.csv";
pub const MODEL_FILE: &str = "model.json";
pub const RUN_FILE: &str = "run.csv";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Lorenz63,
    Henon,
    Lorenz96,
    Csv,
}

/// Flow sampling schedule without the initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSchedule {
    pub dt: f64,
    pub sample_stride: usize,
    pub transient_skip: usize,
}

impl Default for FlowSchedule {
    fn default() -> Self {
        let s = FlowSpec::standard(vec![0.0]);
        FlowSchedule { dt: s.dt, sample_stride: s.sample_stride, transient_skip: s.transient_skip }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub simulation: u64,
    pub diagnostics: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds { simulation: 1, diagnostics: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub system: SystemKind,
    pub lorenz63: Lorenz63Params,
    pub henon: HenonParams,
    pub lorenz96: Lorenz96Params,
    /// Source file when `system` is `csv`.
    pub csv_path: Option<PathBuf>,
    pub flow: FlowSchedule,
    /// Initial state; each system has a default.
    pub initial_state: Option<Vec<f64>>,
    /// Discarded map iterates before sampling (maps only).
    pub map_transient: usize,
    /// Number of generated transitions: the series has `n + 1` samples.
    pub n: usize,
    pub header: bool,
    pub delta: f64,
    pub eta: f64,
    pub theta_zero: f64,
    pub subsample_fraction: f64,
    pub gamma: f64,
    /// Fixed kernel bandwidth; selected from the data when absent.
    pub bandwidth: Option<f64>,
    pub seeds: Seeds,
    pub steps: usize,
    /// Simulation start; the first training sample when absent.
    pub x0: Option<Vec<f64>>,
    pub domain_policy: DomainPolicy,
    pub lags: usize,
    pub theta_horizons: Vec<usize>,
    pub theta_samples: usize,
    pub spread_probes: usize,
    pub out: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let k = KernelConfig::default();
        let d = DiagnosticsConfig::default();
        PipelineConfig {
            system: SystemKind::Henon,
            lorenz63: Lorenz63Params::default(),
            henon: HenonParams::default(),
            lorenz96: Lorenz96Params::default(),
            csv_path: None,
            flow: FlowSchedule::default(),
            initial_state: None,
            map_transient: 100,
            n: 10_000,
            header: false,
            delta: 0.1,
            eta: k.quantile,
            theta_zero: k.zero_threshold,
            subsample_fraction: k.subsample_fraction,
            gamma: k.ridge,
            bandwidth: None,
            seeds: Seeds::default(),
            steps: 100_000,
            x0: None,
            domain_policy: DomainPolicy::Count,
            lags: d.lags,
            theta_horizons: d.theta_horizons,
            theta_samples: d.theta_samples,
            spread_probes: d.spread_probes,
            out: PathBuf::from("znl-out"),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| ZnlError::json("parsing config", e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| ZnlError::io(format!("reading {}", path.display()), e))?;
        Self::from_json(&text).map_err(|e| match e {
            ZnlError::Json { source, .. } => ZnlError::Argument(format!("config {}: {source}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn kernel(&self) -> KernelConfig {
        KernelConfig {
            bandwidth: self.bandwidth,
            zero_threshold: self.theta_zero,
            quantile: self.eta,
            subsample_fraction: self.subsample_fraction,
            ridge: self.gamma,
        }
    }

    pub fn diagnostics(&self) -> DiagnosticsConfig {
        DiagnosticsConfig {
            lags: self.lags,
            theta_horizons: self.theta_horizons.clone(),
            theta_samples: self.theta_samples,
            spread_probes: self.spread_probes,
            seed: self.seeds.diagnostics,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(ZnlError::Argument(what.to_string()));
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return bad("delta must be positive");
        }
        self.kernel().validate()?;
        if self.n == 0 {
            return bad("n must be at least 1");
        }
        if self.steps == 0 {
            return bad("steps must be at least 1");
        }
        if self.lags == 0 {
            return bad("lags must be at least 1");
        }
        if self.theta_horizons.is_empty() || self.theta_horizons.contains(&0) || self.theta_samples == 0 {
            return bad("theta horizons and sample count must be positive");
        }
        if self.system == SystemKind::Csv && self.csv_path.is_none() {
            return bad("system csv needs csv_path");
        }
        Ok(())
    }

    fn initial_state(&self) -> Vec<f64> {
        if let Some(x) = &self.initial_state {
            return x.clone();
        }
        match self.system {
            SystemKind::Lorenz63 => vec![1.0, 1.0, 1.0],
            SystemKind::Henon => vec![0.0, 0.0],
            SystemKind::Lorenz96 => {
                let mut x = vec![self.lorenz96.forcing; self.lorenz96.m];
                x[0] += 0.01;
                x
            }
            SystemKind::Csv => Vec::new(),
        }
    }

    fn flow_spec(&self) -> FlowSpec {
        FlowSpec {
            dt: self.flow.dt,
            sample_stride: self.flow.sample_stride,
            transient_skip: self.flow.transient_skip,
            initial_state: self.initial_state(),
        }
    }
}

/// Generates the configured benchmark series (or reads the CSV source).
pub fn generate_series(cfg: &PipelineConfig) -> Result<TimeSeries> {
    match cfg.system {
        SystemKind::Lorenz63 => generate_lorenz63(cfg.lorenz63, &cfg.flow_spec(), cfg.n),
        SystemKind::Lorenz96 => generate_lorenz96(cfg.lorenz96, &cfg.flow_spec(), cfg.n),
        SystemKind::Henon => {
            let x0 = cfg.initial_state();
            if x0.len() != 2 {
                return Err(ZnlError::Argument("henon initial state needs 2 coordinates".into()));
            }
            generate_henon(cfg.henon, [x0[0], x0[1]], cfg.n, cfg.map_transient)
        }
        SystemKind::Csv => TimeSeries::read_csv(cfg.csv_path.as_deref().expect("validated")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

impl FileHash {
    pub fn of(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| ZnlError::io(format!("reading {}", path.display()), e))?;
        Ok(FileHash { path: path.display().to_string(), sha256: sha256_hex(&bytes) })
    }
}

/// Contents of a `.meta.json` sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub stage: String,
    pub output: FileHash,
    pub inputs: Vec<FileHash>,
    pub config: PipelineConfig,
    pub details: serde_json::Value,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(OsString::from).unwrap_or_default();
    name.push(".meta.json");
    path.with_file_name(name)
}

pub fn read_sidecar(path: &Path) -> Result<Provenance> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| ZnlError::io(format!("reading {}", side.display()), e))?;
    serde_json::from_str(&text).map_err(|e| ZnlError::json(format!("parsing {}", side.display()), e))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| ZnlError::io(format!("writing {}", path.display()), e))
}

fn write_with_sidecar(
    path: &Path,
    contents: &[u8],
    stage: &str,
    inputs: &[&Path],
    cfg: &PipelineConfig,
    details: serde_json::Value,
) -> Result<()> {
    write_file(path, contents)?;
    let prov = Provenance {
        tool: "znl".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        stage: stage.into(),
        output: FileHash { path: path.display().to_string(), sha256: sha256_hex(contents) },
        inputs: inputs.iter().map(|p| FileHash::of(p)).collect::<Result<_>>()?,
        config: cfg.clone(),
        details,
    };
    let text = serde_json::to_string_pretty(&prov).expect("sidecar serializes");
    write_file(&sidecar_path(path), text.as_bytes())
}

fn ensure_out(cfg: &PipelineConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out).map_err(|e| ZnlError::io(format!("creating {}", cfg.out.display()), e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| ZnlError::io(format!("reading {}", path.display()), e))
}

/// Writes `series.csv`. A CSV source is copied byte for byte.
pub fn cmd_generate(cfg: &PipelineConfig) -> Result<PathBuf> {
    cfg.validate()?;
    ensure_out(cfg)?;
    let path = cfg.out.join(SERIES_FILE);
    if cfg.system == SystemKind::Csv {
        let src = cfg.csv_path.as_deref().expect("validated");
        let bytes = fs::read(src).map_err(|e| ZnlError::io(format!("reading {}", src.display()), e))?;
        let series = TimeSeries::from_csv(&String::from_utf8_lossy(&bytes))
            .map_err(|e| ZnlError::Data(format!("{}: {e}", src.display())))?;
        let details = serde_json::json!({ "samples": series.len(), "dim": series.dim(), "source": "csv" });
        write_with_sidecar(&path, &bytes, "generate", &[src], cfg, details)?;
    } else {
        let series = generate_series(cfg)?;
        let details = serde_json::json!({ "samples": series.len(), "dim": series.dim() });
        write_with_sidecar(&path, series.to_csv(cfg.header).as_bytes(), "generate", &[], cfg, details)?;
    }
    Ok(path)
}

/// Fits the model to a series file and writes `model.json`.
pub fn cmd_fit(cfg: &PipelineConfig, series_path: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    ensure_out(cfg)?;
    let series = TimeSeries::from_csv(&read_text(series_path)?)
        .map_err(|e| ZnlError::Data(format!("{}: {e}", series_path.display())))?;
    let model = build_model(&series, cfg.delta, &cfg.kernel())?;
    let stationary = stationary_measure(model.transitions(), DEFAULT_STATIONARY_TOL, DEFAULT_STATIONARY_MAX_ITERS)?;
    let details = serde_json::json!({
        "cells": model.cover().len(),
        "states": model.len(),
        "dropped_cells": model.transitions().dropped_cells().len(),
        "edges": model.transitions().edge_count(),
        "bandwidth": model.bandwidth(),
        "stationary_iterations": stationary.iterations,
        "stationary_residual": stationary.residual,
    });
    let path = cfg.out.join(MODEL_FILE);
    write_with_sidecar(&path, model.to_json().as_bytes(), "fit", &[series_path], cfg, details)?;
    Ok(path)
}

pub fn load_model(path: &Path) -> Result<ZnlModel> {
    ZnlModel::from_json(&read_text(path)?).map_err(|e| match e {
        ZnlError::Json { source, .. } => ZnlError::Data(format!("{}: {source}", path.display())),
        ZnlError::Data(msg) => ZnlError::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Simulates the model and writes `run.csv`. A truncated run is still
/// written, then reported as an error.
pub fn cmd_simulate(cfg: &PipelineConfig, model_path: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    ensure_out(cfg)?;
    let model = load_model(model_path)?;
    let x0 = cfg.x0.clone().unwrap_or_else(|| model.series().point(0).to_vec());
    let run = simulate_observed(&model, &x0, cfg.steps, cfg.seeds.simulation, cfg.domain_policy, |_| {})?;
    let details = serde_json::json!({
        "seed": run.seed,
        "model_sha256": model.hash(),
        "steps": cfg.steps,
        "rows": run.len(),
        "initial_distance": run.initial_distance,
        "far_start": run.far_start(model.delta()),
        "underflow_steps": run.underflow_steps,
        "complete": run.is_complete(),
        "aborted_at": run.aborted.as_ref().map(|a| a.step),
    });
    let path = cfg.out.join(RUN_FILE);
    write_with_sidecar(&path, run.to_csv().as_bytes(), "simulate", &[model_path], cfg, details)?;
    run.into_result()?;
    Ok(path)
}

pub fn load_run(path: &Path) -> Result<SimulationRun> {
    let prov = read_sidecar(path)?;
    let seed = prov.details.get("seed").and_then(|v| v.as_u64()).unwrap_or(0);
    let init = prov.details.get("initial_distance").and_then(|v| v.as_f64()).unwrap_or(0.0);
    let mut run = SimulationRun::from_csv(&read_text(path)?, seed, init)
        .map_err(|e| ZnlError::Data(format!("{}: {e}", path.display())))?;
    run.underflow_steps = prov.details.get("underflow_steps").and_then(|v| v.as_u64()).unwrap_or(0) as usize;
    Ok(run)
}

/// Writes `report.json` plus the curve CSVs.
pub fn cmd_diagnose(cfg: &PipelineConfig, model_path: &Path, run_path: &Path, series_path: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    ensure_out(cfg)?;
    let model = load_model(model_path)?;
    let run = load_run(run_path)?;
    let series = TimeSeries::from_csv(&read_text(series_path)?)
        .map_err(|e| ZnlError::Data(format!("{}: {e}", series_path.display())))?;
    if run.points.dim() != series.dim() {
        return Err(ZnlError::Data("run and series dimensions differ".into()));
    }
    let report = diagnose(&model, &run, &series, &cfg.diagnostics())?;
    let inputs = [model_path, run_path, series_path];
    let none = serde_json::Value::Null;
    let curves = [
        ("autocorr_true.csv", DiagnosticsReport::curve_csv(&report.autocorr_true)),
        ("autocorr_sim.csv", DiagnosticsReport::curve_csv(&report.autocorr_sim)),
        ("theta.csv", report.theta_csv()),
    ];
    for (name, text) in curves {
        write_with_sidecar(&cfg.out.join(name), text.as_bytes(), "diagnose", &inputs, cfg, none.clone())?;
    }
    let path = cfg.out.join(REPORT_FILE);
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    write_with_sidecar(&path, text.as_bytes(), "diagnose", &inputs, cfg, none)?;
    Ok(path)
}

/// Runs all four stages; the first failure aborts with its stage name.
pub fn cmd_pipeline(cfg: &PipelineConfig) -> Result<PathBuf> {
    let stage = |name: &'static str| move |e: ZnlError| ZnlError::Stage { stage: name, source: Box::new(e) };
    let series = cmd_generate(cfg).map_err(stage("generate"))?;
    let model = cmd_fit(cfg, &series).map_err(stage("fit"))?;
    let run = cmd_simulate(cfg, &model).map_err(stage("simulate"))?;
    cmd_diagnose(cfg, &model, &run, &series).map_err(stage("diagnose"))
}

#[derive(Debug, Parser)]
#[command(name = "znl", version, about = "Reconstruct dynamics from a time series as a cell-driven Markov process")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a benchmark series (or copy a CSV source).
    Generate(Common),
    /// Fit a model to a series file.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Series CSV [default: OUT/series.csv]
        #[arg(long)]
        series: Option<PathBuf>,
    },
    /// Simulate a fitted model.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Model file [default: OUT/model.json]
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Compare a simulated run with the training series.
    Diagnose {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        run: Option<PathBuf>,
        #[arg(long)]
        series: Option<PathBuf>,
    },
    /// Run every stage.
    Pipeline(Common),
}

/// Flags shared by all subcommands; they override the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub system: Option<SystemKind>,
    /// Seed for simulation and diagnostics.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cover radius
    #[arg(long)]
    pub delta: Option<f64>,
    /// Ridge parameter of the edge maps
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Quantile used for bandwidth selection
    #[arg(long)]
    pub eta: Option<f64>,
    /// Number of generated transitions.
    #[arg(long)]
    pub n: Option<usize>,
    /// Simulation length.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Autocorrelation lag horizon.
    #[arg(long)]
    pub lags: Option<usize>,
    /// Write a header row in generated CSV.
    #[arg(long)]
    pub header: bool,
}

impl Common {
    /// Effective configuration: file values, then flag overrides.
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = self.system {
            cfg.system = v;
        }
        if let Some(v) = self.seed {
            cfg.seeds.simulation = v;
            cfg.seeds.diagnostics = v;
        }
        if let Some(v) = self.delta {
            cfg.delta = v;
        }
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = self.eta {
            cfg.eta = v;
        }
        if let Some(v) = self.n {
            cfg.n = v;
        }
        if let Some(v) = self.steps {
            cfg.steps = v;
        }
        if let Some(v) = self.lags {
            cfg.lags = v;
        }
        if self.header {
            cfg.header = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("ZNL_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ZnlError::Argument(format!("ZNL_THREADS must be a positive integer, got {v:?}")))?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Executes a parsed command and returns the path of its main output.
pub fn execute(cli: &Cli) -> Result<PathBuf> {
    configure_threads()?;
    match &cli.command {
        Command::Generate(c) => cmd_generate(&c.resolve()?),
        Command::Fit { common, series } => {
            let cfg = common.resolve()?;
            let series = series.clone().unwrap_or_else(|| cfg.out.join(SERIES_FILE));
            cmd_fit(&cfg, &series)
        }
        Command::Simulate { common, model } => {
            let cfg = common.resolve()?;
            let model = model.clone().unwrap_or_else(|| cfg.out.join(MODEL_FILE));
            cmd_simulate(&cfg, &model)
        }
        Command::Diagnose { common, model, run, series } => {
            let cfg = common.resolve()?;
            let model = model.clone().unwrap_or_else(|| cfg.out.join(MODEL_FILE));
            let run = run.clone().unwrap_or_else(|| cfg.out.join(RUN_FILE));
            let series = series.clone().unwrap_or_else(|| cfg.out.join(SERIES_FILE));
            cmd_diagnose(&cfg, &model, &run, &series)
        }
        Command::Pipeline(c) => cmd_pipeline(&c.resolve()?),
    }
}

/// Parses arguments, runs, reports, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
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
    match execute(&cli) {
        Ok(path) => {
            println!("{}", path.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
