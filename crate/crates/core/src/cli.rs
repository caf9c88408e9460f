//! `readout` command line: JSON run configs, flag overrides and one output
//! directory per run.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::calibration::{calibrate, stark_conventions};
use crate::dynamics::{integrate_eom, DriveSpec, Envelope, DEFAULT_DT};
use crate::error::Error;
use crate::io;
use crate::lindblad::{self, Dims, EvolveOptions, LindbladOptions};
use crate::model::{derive_dispersive, n_crit, omega_q_for_detuning, DeviceParams, DispersiveDerived, QubitState};
use crate::normal_modes::{modes_from_circuit, sweep_modes};
use crate::presets::operating_point;
use crate::shots::{self, DecayModel, PointerModel, ShotOptions};
use crate::snr::{assignment_error_bound, low_mode_window, optimal_drive_frequency, predict_readout, snr_band};
use crate::spectrum::{self, PARAM_NAMES};
use crate::units::{hz, to_hz, NS};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Run {
        context: String,
        #[source]
        source: Error,
    },
    #[error(transparent)]
    Clap(#[from] clap::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Run { .. } => 1,
            CliError::Clap(e) => e.exit_code(),
        }
    }
}

trait Context<T> {
    fn context(self, what: impl Into<String>) -> Result<T, CliError>;
}

impl<T> Context<T> for crate::Result<T> {
    fn context(self, what: impl Into<String>) -> Result<T, CliError> {
        self.map_err(|source| CliError::Run {
            context: what.into(),
            source,
        })
    }
}

#[derive(Debug, Parser)]
#[command(name = "readout", version, about = "Dispersive readout through a resonator and Purcell filter")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normal modes over a detuning grid (modes.csv).
    Modes(Common),
    /// SNR and assignment-error bound over detuning, integration time and power (snr.csv).
    Snr(Common),
    /// Monte-Carlo single shots, mixture fit and metrics (shots.csv, metrics.json).
    Shots(Common),
    /// Joint fit of ground/excited transmission spectra (fit.json).
    Fit(Common),
    /// Master-equation trajectories compared with the linear model.
    Lindblad(Common),
    /// Photon-number and drive calibration from Stark shifts (calibration.json).
    Calibrate(Common),
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Run configuration (JSON). Flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Device file (JSON, Hz) or `preset:<detuning GHz>`, e.g. `preset:-1.3`.
    #[arg(long)]
    pub device: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Override any config key by dot path, e.g. `--set snr.taus_s=[1e-7,2e-7]`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub device: Option<String>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub modes: ModesConfig,
    pub snr: SnrConfig,
    pub shots: ShotsConfig,
    pub fit: FitConfig,
    pub lindblad: LindbladConfig,
    pub calibrate: CalibrateConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ModesConfig {
    /// Dressed qubit–resonator detunings ω_q − ω_r^g.
    pub detunings_hz: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SnrConfig {
    pub detunings_hz: Vec<f64>,
    pub taus_s: Vec<f64>,
    pub n_over_ncrit: Vec<f64>,
    pub dt_s: f64,
    /// Also evaluate the ±1 MHz / ±5 % η parameter band.
    pub band: bool,
}

impl Default for SnrConfig {
    fn default() -> Self {
        SnrConfig {
            detunings_hz: Vec::new(),
            taus_s: [50.0, 100.0, 200.0, 300.0, 400.0].iter().map(|t| t * NS).collect(),
            n_over_ncrit: vec![0.1, 0.25, 0.5, 1.0],
            dt_s: DEFAULT_DT,
            band: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShotsConfig {
    /// Defaults to the device's own qubit frequency.
    pub detuning_hz: Option<f64>,
    pub tau_s: f64,
    pub n_over_ncrit: f64,
    pub n_shots: usize,
    pub t1_enabled: bool,
    pub decay_model: DecayModel,
    pub broadening: Option<f64>,
    /// Pin the SNR instead of taking it from the trajectory.
    pub snr: Option<f64>,
    pub dt_s: f64,
}

impl Default for ShotsConfig {
    fn default() -> Self {
        ShotsConfig {
            detuning_hz: None,
            tau_s: 100.0 * NS,
            n_over_ncrit: 0.5,
            n_shots: 10_000,
            t1_enabled: true,
            decay_model: DecayModel::Projective,
            broadening: None,
            snr: None,
            dt_s: DEFAULT_DT,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub trace_g: Option<PathBuf>,
    pub trace_e: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LindbladConfig {
    pub detuning_hz: Option<f64>,
    /// `[qubit levels, resonator Fock levels, filter Fock levels]`.
    pub dims: [usize; 3],
    /// Target ground-state resonator photons.
    pub n_g: f64,
    pub duration_s: f64,
    /// Defaults to half the RK4 stability bound.
    pub dt_s: Option<f64>,
    pub output_stride: usize,
    pub t1_enabled: bool,
    pub convergence_gate: bool,
}

impl Default for LindbladConfig {
    fn default() -> Self {
        LindbladConfig {
            detuning_hz: None,
            dims: [2, 10, 10],
            n_g: 0.25,
            duration_s: 200.0 * NS,
            dt_s: None,
            output_stride: 20,
            t1_enabled: false,
            convergence_gate: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrateConfig {
    pub stark: Option<PathBuf>,
    pub detuning_hz: Option<f64>,
    /// Defaults to the optimal readout frequency.
    pub omega_d_hz: Option<f64>,
}

fn set_path(root: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (k, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(CliError::Usage(format!("empty segment in key {key:?}")));
        }
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Usage(format!("{key:?}: {part:?} is not inside an object")))?;
        if k + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

/// Reads the config file and applies flag overrides.
pub fn resolve_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut root = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(Error::from).context(format!("reading {}", path.display()))?;
            serde_json::from_str::<Value>(&text)
                .map_err(Error::from)
                .context(format!("parsing {}", path.display()))?
        }
        None => Value::Object(Default::default()),
    };
    if !root.is_object() {
        return Err(CliError::Usage("config must be a JSON object".into()));
    }
    if let Some(d) = &common.device {
        set_path(&mut root, "device", Value::String(d.clone()))?;
    }
    if let Some(o) = &common.out {
        set_path(&mut root, "out", Value::String(o.display().to_string()))?;
    }
    if let Some(s) = common.seed {
        set_path(&mut root, "seed", Value::from(s))?;
    }
    if let Some(t) = common.threads {
        set_path(&mut root, "threads", Value::from(t))?;
    }
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
        set_path(&mut root, k, value)?;
    }
    serde_json::from_value(root).map_err(|e| CliError::Usage(format!("config: {e}")))
}

pub fn load_device(source: &str) -> Result<DeviceParams, CliError> {
    if let Some(rest) = source.strip_prefix("preset:") {
        let ghz: f64 = rest
            .parse()
            .map_err(|_| CliError::Usage(format!("preset detuning must be a number in GHz, got {rest:?}")))?;
        return operating_point(ghz)
            .map(|p| p.device())
            .ok_or_else(|| CliError::Usage(format!("no preset at {ghz} GHz (have -2.7, -2.4, -1.9, -1.6, -1.3)")));
    }
    DeviceParams::load(Path::new(source)).context(format!("loading device {source}"))
}

fn at_detuning(params: &DeviceParams, detuning_hz: Option<f64>) -> Result<DispersiveDerived, CliError> {
    let wq = match detuning_hz {
        Some(d) => Some(omega_q_for_detuning(params, hz(d)).context(format!("detuning {d:e} Hz"))?),
        None => None,
    };
    derive_dispersive(params, wq).context("dispersive parameters")
}

fn require_nonempty(name: &str, v: &[f64]) -> Result<(), CliError> {
    if v.is_empty() {
        return Err(CliError::Usage(format!("{name} must list at least one value")));
    }
    Ok(())
}

/// What a run wrote.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub out: PathBuf,
    pub files: Vec<String>,
}

#[derive(Serialize)]
struct ConfigEcho<'a> {
    version: &'static str,
    command: &'a str,
    config: &'a RunConfig,
    device: Option<crate::model::DeviceFile>,
}

struct Run {
    out: PathBuf,
    files: Vec<String>,
}

impl Run {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.out.join(name)
    }
}

pub fn run<I, T>(args: I) -> Result<RunSummary, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    let (name, common) = match &cli.command {
        Command::Modes(c) => ("modes", c),
        Command::Snr(c) => ("snr", c),
        Command::Shots(c) => ("shots", c),
        Command::Fit(c) => ("fit", c),
        Command::Lindblad(c) => ("lindblad", c),
        Command::Calibrate(c) => ("calibrate", c),
    };
    let cfg = resolve_config(common)?;
    if let Some(n) = cfg.threads {
        if n == 0 {
            return Err(CliError::Usage("threads must be ≥ 1".into()));
        }
        // a global pool may already exist when several runs share a process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let out = cfg.out.clone().ok_or_else(|| CliError::Usage("an output directory is required (--out)".into()))?;
    let device = match &cfg.device {
        Some(source) => Some(load_device(source)?),
        None if name == "fit" => None,
        None => return Err(CliError::Usage("a device is required (--device)".into())),
    };
    std::fs::create_dir_all(&out).map_err(Error::from).context(format!("creating {}", out.display()))?;
    let mut run = Run { out, files: Vec::new() };

    match name {
        "modes" => cmd_modes(&cfg, device.as_ref().unwrap(), &mut run)?,
        "snr" => cmd_snr(&cfg, device.as_ref().unwrap(), &mut run)?,
        "shots" => cmd_shots(&cfg, device.as_ref().unwrap(), &mut run)?,
        "fit" => cmd_fit(&cfg, &mut run)?,
        "lindblad" => cmd_lindblad(&cfg, device.as_ref().unwrap(), &mut run)?,
        _ => cmd_calibrate(&cfg, device.as_ref().unwrap(), &mut run)?,
    }

    let echo = ConfigEcho {
        version: env!("CARGO_PKG_VERSION"),
        command: name,
        config: &cfg,
        device: device.map(|d| d.to_file()),
    };
    let p = run.path("config-echo.json");
    io::write_json(&p, &echo).context("writing config echo")?;
    Ok(RunSummary {
        out: run.out,
        files: run.files,
    })
}

/// Entry point for the binary: returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match run(args) {
        Ok(_) => 0,
        Err(CliError::Clap(e)) => {
            let _ = e.print();
            e.exit_code()
        }
        Err(e) => {
            eprintln!("readout: {e}");
            e.exit_code()
        }
    }
}

fn cmd_modes(cfg: &RunConfig, params: &DeviceParams, run: &mut Run) -> Result<(), CliError> {
    let grid = &cfg.modes.detunings_hz;
    require_nonempty("modes.detunings_hz", grid)?;
    let dets: Vec<f64> = grid.iter().map(|&d| hz(d)).collect();
    let pts = sweep_modes(params, &dets).context("mode sweep")?;
    let rows: Vec<Vec<f64>> = pts
        .iter()
        .zip(grid)
        .map(|(s, &det_hz)| {
            let m = &s.modes;
            let d = &s.derived;
            let nc = n_crit(params, d).unwrap_or(f64::NAN);
            vec![
                det_hz,
                to_hz(d.omega_q),
                to_hz(d.omega_r_g),
                to_hz(d.omega_r_e),
                to_hz(m.omega_l_g),
                to_hz(m.omega_h_g),
                to_hz(m.omega_l_e),
                to_hz(m.omega_h_e),
                to_hz(m.kappa_l_g),
                to_hz(m.kappa_l_e),
                to_hz(m.kappa_h_g),
                to_hz(m.kappa_h_e),
                to_hz(d.chi),
                to_hz(m.chi_l),
                to_hz(m.chi_h),
                nc,
            ]
        })
        .collect();
    let p = run.path("modes.csv");
    io::write_table(
        &p,
        &[
            "detuning_Hz",
            "omega_q_Hz",
            "omega_r_g_Hz",
            "omega_r_e_Hz",
            "omega_l_g_Hz",
            "omega_h_g_Hz",
            "omega_l_e_Hz",
            "omega_h_e_Hz",
            "kappa_l_g_Hz",
            "kappa_l_e_Hz",
            "kappa_h_g_Hz",
            "kappa_h_e_Hz",
            "chi_Hz",
            "chi_l_Hz",
            "chi_h_Hz",
            "n_crit",
        ],
        &rows,
    )
    .context("writing modes.csv")
}

fn cmd_snr(cfg: &RunConfig, params: &DeviceParams, run: &mut Run) -> Result<(), CliError> {
    let c = &cfg.snr;
    require_nonempty("snr.detunings_hz", &c.detunings_hz)?;
    require_nonempty("snr.taus_s", &c.taus_s)?;
    require_nonempty("snr.n_over_ncrit", &c.n_over_ncrit)?;
    let mut grid = Vec::new();
    for &d in &c.detunings_hz {
        for &tau in &c.taus_s {
            for &n in &c.n_over_ncrit {
                grid.push((d, tau, n));
            }
        }
    }
    let rows = grid
        .par_iter()
        .map(|&(d, tau, n)| -> Result<Vec<f64>, CliError> {
            let derived = at_detuning(params, Some(d))?;
            let what = format!("detuning {d:e} Hz, tau {tau:e} s, n/n_crit {n}");
            let pred = predict_readout(params, &derived, n, tau, c.dt_s).context(what.clone())?;
            let m = pred.metrics;
            let mut row = vec![
                d,
                tau,
                n,
                m.snr,
                m.epsilon_a,
                to_hz(pred.omega_d),
                to_hz(pred.amplitude),
                m.n_g,
                m.n_e,
                m.overlap_error,
                m.t1_error,
            ];
            if c.band {
                let (lo, hi) = snr_band(params, &pred, tau, c.dt_s).context(what)?;
                row.extend([lo, hi]);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut header = vec![
        "detuning_Hz",
        "tau_s",
        "n_g_over_ncrit",
        "snr",
        "epsilon_a_bound",
        "omega_d_Hz",
        "drive_Hz",
        "n_g",
        "n_e",
        "overlap_error",
        "t1_error",
    ];
    if c.band {
        header.extend(["snr_lo", "snr_hi"]);
    }
    let p = run.path("snr.csv");
    io::write_table(&p, &header, &rows).context("writing snr.csv")
}

#[derive(Serialize)]
struct ShotsReport {
    #[serde(flatten)]
    metrics: shots::ShotMetrics,
    epsilon_a_std_error: f64,
    bound: crate::snr::AssignmentBound,
    predicted_snr: f64,
    omega_d_hz: f64,
    photons_g: f64,
    photons_e: f64,
    mixture_iterations: usize,
    mixture_merged: bool,
}

fn cmd_shots(cfg: &RunConfig, params: &DeviceParams, run: &mut Run) -> Result<(), CliError> {
    let c = &cfg.shots;
    if c.n_shots == 0 {
        return Err(CliError::Usage("shots.n_shots must be ≥ 1".into()));
    }
    let derived = at_detuning(params, c.detuning_hz)?;
    let pred = predict_readout(params, &derived, c.n_over_ncrit, c.tau_s, c.dt_s).context("readout prediction")?;
    let mut pointer = PointerModel::from_trajectory(&pred.trajectory, params, c.tau_s).context("pointer model")?;
    if let Some(target) = c.snr {
        if !(target > 0.0) {
            return Err(CliError::Usage("shots.snr must be > 0".into()));
        }
        pointer.sigma = (pointer.mu_e - pointer.mu_g).norm() / target.sqrt();
    }
    let options = ShotOptions {
        t1_enabled: c.t1_enabled,
        decay_model: c.decay_model,
        broadening: c.broadening,
    };
    let set = shots::sample_shots(&pointer, c.n_shots, cfg.seed, options).context("sampling shots")?;
    let fit = shots::fit_mixture(&set).context("mixture fit")?;
    let metrics = shots::extract_metrics(&fit, &set);
    let report = ShotsReport {
        metrics,
        epsilon_a_std_error: metrics.epsilon_a_std_error(),
        bound: assignment_error_bound(pointer.snr(), c.tau_s, params.t1),
        predicted_snr: pointer.snr(),
        omega_d_hz: to_hz(pred.omega_d),
        photons_g: pred.metrics.n_g,
        photons_e: pred.metrics.n_e,
        mixture_iterations: fit.iterations,
        mixture_merged: fit.merged,
    };
    let p = run.path("shots.csv");
    io::write_shots_csv(&p, &set).context("writing shots.csv")?;
    let p = run.path("metrics.json");
    io::write_json(&p, &report).context("writing metrics.json")
}

#[derive(Serialize)]
struct FitReport {
    /// Hz for frequencies, 1/Hz for the tilt, rad for the phase.
    estimates: serde_json::Map<String, Value>,
    std_errors: serde_json::Map<String, Value>,
    omega_0_hz: f64,
    residual_norm: f64,
    iterations: usize,
    condition_number: f64,
    warnings: Vec<String>,
    modes_hz: ModesHz,
}

#[derive(Serialize)]
struct ModesHz {
    omega_l_g: f64,
    omega_h_g: f64,
    omega_l_e: f64,
    omega_h_e: f64,
    kappa_l_g: f64,
    kappa_l_e: f64,
    kappa_h_g: f64,
    kappa_h_e: f64,
    two_chi_l: f64,
    two_chi_h: f64,
}

fn to_display_units(name: &str, v: f64) -> f64 {
    match name {
        "A" | "phi" => v,
        "k" => hz(v),
        _ => to_hz(v),
    }
}

fn cmd_fit(cfg: &RunConfig, run: &mut Run) -> Result<(), CliError> {
    let c = &cfg.fit;
    let (pg, pe) = match (&c.trace_g, &c.trace_e) {
        (Some(g), Some(e)) => (g, e),
        _ => return Err(CliError::Usage("fit.trace_g and fit.trace_e are required".into())),
    };
    let g = io::read_trace_csv(pg, QubitState::Ground).context(format!("reading {}", pg.display()))?;
    let e = io::read_trace_csv(pe, QubitState::Excited).context(format!("reading {}", pe.display()))?;
    let init = spectrum::initial_guess(&g, &e).context("initial guess")?;
    let fit = spectrum::fit_spectrum(&g, &e, &init).context("spectrum fit")?;
    let m = fit.model;
    let values = [m.amplitude, m.tilt, m.phi, m.kappa_p, m.j, m.omega_p, m.omega_r_g, m.omega_r_e];
    let mut estimates = serde_json::Map::new();
    let mut errors = serde_json::Map::new();
    for (k, name) in PARAM_NAMES.iter().enumerate() {
        estimates.insert(name.to_string(), Value::from(to_display_units(name, values[k])));
        errors.insert(name.to_string(), Value::from(to_display_units(name, fit.std_errors[k])));
    }
    let modes = modes_from_circuit([m.omega_r_g, m.omega_r_e], [m.j, m.j], m.omega_p, m.kappa_p);
    let report = FitReport {
        estimates,
        std_errors: errors,
        omega_0_hz: to_hz(m.omega_0),
        residual_norm: fit.residual_norm,
        iterations: fit.iterations,
        condition_number: fit.condition_number,
        warnings: fit.warnings.iter().map(|w| w.to_string()).collect(),
        modes_hz: ModesHz {
            omega_l_g: to_hz(modes.omega_l_g),
            omega_h_g: to_hz(modes.omega_h_g),
            omega_l_e: to_hz(modes.omega_l_e),
            omega_h_e: to_hz(modes.omega_h_e),
            kappa_l_g: to_hz(modes.kappa_l_g),
            kappa_l_e: to_hz(modes.kappa_l_e),
            kappa_h_g: to_hz(modes.kappa_h_g),
            kappa_h_e: to_hz(modes.kappa_h_e),
            two_chi_l: to_hz(2.0 * modes.chi_l),
            two_chi_h: to_hz(2.0 * modes.chi_h),
        },
    };
    let p = run.path("fit.json");
    io::write_json(&p, &report).context("writing fit.json")
}

#[derive(Serialize)]
struct LindbladSummary {
    omega_d_hz: f64,
    drive_hz: f64,
    dt_s: f64,
    dims: Dims,
    deviation_g: f64,
    deviation_e: f64,
    max_trace_error: f64,
    max_hermiticity_error: f64,
    min_eigenvalue: f64,
    convergence: Option<lindblad::ConvergenceReport>,
}

fn cmd_lindblad(cfg: &RunConfig, params: &DeviceParams, run: &mut Run) -> Result<(), CliError> {
    let c = &cfg.lindblad;
    if !(c.duration_s > 0.0) || c.output_stride == 0 {
        return Err(CliError::Usage("lindblad.duration_s must be > 0 and output_stride ≥ 1".into()));
    }
    let derived = at_detuning(params, c.detuning_hz)?;
    let omega_d = optimal_drive_frequency(&derived, params, low_mode_window(&derived, params)).context("drive frequency")?;
    let amp = crate::calibration::drive_amplitude_from_photons(c.n_g, &derived, params, omega_d).context("drive amplitude")?;
    let drive = DriveSpec {
        omega_d,
        amplitude: amp,
        phase: 0.0,
        envelope: Envelope::GaussianFilteredRect { sigma: 0.5 * NS },
        duration: c.duration_s,
        tau: c.duration_s,
    };
    let dims = Dims::new(c.dims[0], c.dims[1], c.dims[2]);
    let options = LindbladOptions { t1_enabled: c.t1_enabled };
    let model = lindblad::build_effective_hamiltonian(&derived, params, dims, &drive, options).context("effective Hamiltonian")?;
    let dt = c.dt_s.unwrap_or(0.5 * model.max_dt());
    let fields = integrate_eom(&derived, params, &drive, dt).context("semiclassical fields")?;
    let evo = EvolveOptions {
        dt,
        output_stride: c.output_stride,
        check_positivity: true,
    };
    let mut summary = LindbladSummary {
        omega_d_hz: to_hz(omega_d),
        drive_hz: to_hz(amp),
        dt_s: dt,
        dims,
        deviation_g: 0.0,
        deviation_e: 0.0,
        max_trace_error: 0.0,
        max_hermiticity_error: 0.0,
        min_eigenvalue: f64::INFINITY,
        convergence: None,
    };
    for state in QubitState::BOTH {
        let tr = lindblad::evolve(&model, state, c.duration_s, evo).context(format!("evolution from {}", state.label()))?;
        let dev = lindblad::semiclassical_deviation(&tr, &fields, state).context("deviation")?;
        match state {
            QubitState::Ground => summary.deviation_g = dev,
            QubitState::Excited => summary.deviation_e = dev,
        }
        summary.max_trace_error = summary.max_trace_error.max(tr.max_trace_error);
        summary.max_hermiticity_error = summary.max_hermiticity_error.max(tr.max_hermiticity_error);
        summary.min_eigenvalue = summary.min_eigenvalue.min(tr.min_eigenvalue);
        let p = run.path(&format!("lindblad_{}.csv", state.label()));
        io::write_lindblad_csv(&p, &tr).context("writing trajectory")?;
    }
    if c.convergence_gate {
        let grown = lindblad::build_effective_hamiltonian(&derived, params, dims.grown(2), &drive, options)
            .context("grown Hamiltonian")?;
        let gate_dt = dt.min(0.5 * grown.max_dt());
        summary.convergence = Some(
            lindblad::convergence_gate(&derived, params, dims, &drive, options, QubitState::Ground, c.duration_s, gate_dt)
                .context("convergence gate")?,
        );
    }
    let p = run.path("semiclassical.csv");
    io::write_trajectory_csv(&p, &fields.decimated(4096)).context("writing semiclassical.csv")?;
    let p = run.path("lindblad_summary.json");
    io::write_json(&p, &summary).context("writing lindblad_summary.json")
}

#[derive(Serialize)]
struct CalibrationOutput {
    omega_d_hz: f64,
    n_g: Vec<f64>,
    drive_hz: Vec<f64>,
    drive_hz_per_setting: f64,
    power_law_exponent: Option<f64>,
    stark_per_photon_lamb_hz: f64,
    stark_per_photon_modes_hz: f64,
    stark_convention_ratio: f64,
}

fn cmd_calibrate(cfg: &RunConfig, params: &DeviceParams, run: &mut Run) -> Result<(), CliError> {
    let c = &cfg.calibrate;
    let path = c.stark.as_ref().ok_or_else(|| CliError::Usage("calibrate.stark is required".into()))?;
    let derived = at_detuning(params, c.detuning_hz)?;
    let data = io::read_stark_csv(path, derived.omega_q).context(format!("reading {}", path.display()))?;
    let omega_d = match c.omega_d_hz {
        Some(w) => hz(w),
        None => optimal_drive_frequency(&derived, params, low_mode_window(&derived, params)).context("drive frequency")?,
    };
    let rep = calibrate(&data, &derived, params, omega_d).context("calibration")?;
    let conv = stark_conventions(&derived, params);
    let out = CalibrationOutput {
        omega_d_hz: to_hz(omega_d),
        n_g: rep.n_g.clone(),
        drive_hz: rep.amplitudes.iter().map(|a| to_hz(*a)).collect(),
        drive_hz_per_setting: to_hz(rep.amplitude_per_setting),
        power_law_exponent: rep.power_law_exponent,
        stark_per_photon_lamb_hz: to_hz(conv.lamb_per_photon),
        stark_per_photon_modes_hz: to_hz(conv.dispersive_per_photon),
        stark_convention_ratio: conv.ratio,
    };
    let p = run.path("calibration.json");
    io::write_json(&p, &out).context("writing calibration.json")
}
