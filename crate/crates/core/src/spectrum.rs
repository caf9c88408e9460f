//! Feedline transmission through the resonator–filter pair, and the joint g/e fit
//! that extracts circuit parameters from measured magnitude spectra.
//!
//! ```text
//! |S|(ω) = (A + k(ω − ω_0)) · |cos φ − e^{iφ} κ_p(−2iΔ_r) / (4J² + (κ_p − 2iΔ_p)(−2iΔ_r))|
//! ```
//!
//! with `Δ_r = ω − ω_r^{g/e}` and `Δ_p = ω − ω_p`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Warning};
use crate::lm::{levenberg_marquardt, LmOptions};
use crate::model::{DeviceParams, DispersiveDerived, QubitState};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
/// Internal fit unit: parameters with frequency dimension are expressed in 2π·MHz.
const SCALE: f64 = 2.0 * PI * 1e6;
const CONDITION_LIMIT: f64 = 1e10;

pub const PARAM_NAMES: [&str; 8] = ["A", "k", "phi", "kappa_p", "J", "omega_p", "omega_r_g", "omega_r_e"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumModel {
    pub amplitude: f64,
    /// Tilt slope, per rad/s.
    pub tilt: f64,
    /// Tilt centre; held fixed by the fit.
    pub omega_0: f64,
    pub phi: f64,
    pub kappa_p: f64,
    pub j: f64,
    pub omega_p: f64,
    pub omega_r_g: f64,
    pub omega_r_e: f64,
}

impl SpectrumModel {
    /// Untilted, unrotated unit-amplitude background around the device's filter.
    pub fn from_device(params: &DeviceParams, derived: &DispersiveDerived) -> Self {
        SpectrumModel {
            amplitude: 1.0,
            tilt: 0.0,
            omega_0: params.omega_p,
            phi: 0.0,
            kappa_p: params.kappa_p,
            j: params.j,
            omega_p: params.omega_p,
            omega_r_g: derived.omega_r_g,
            omega_r_e: derived.omega_r_e,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0) {
            return Err(Error::Input(format!("spectrum amplitude must be > 0 (got {})", self.amplitude)));
        }
        if !(self.phi.abs() <= PI) {
            return Err(Error::Input(format!("spectrum phase must lie in [-π, π] (got {})", self.phi)));
        }
        let all = [self.tilt, self.omega_0, self.kappa_p, self.j, self.omega_p, self.omega_r_g, self.omega_r_e];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("spectrum parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn omega_r(&self, state: QubitState) -> f64 {
        match state {
            QubitState::Ground => self.omega_r_g,
            QubitState::Excited => self.omega_r_e,
        }
    }

    pub fn magnitude(&self, omega: f64, state: QubitState) -> f64 {
        let dr = -2.0 * I * (omega - self.omega_r(state));
        let dp = omega - self.omega_p;
        let inner = self.kappa_p * dr / (4.0 * self.j * self.j + (self.kappa_p - 2.0 * I * dp) * dr);
        let rot = Complex64::from_polar(1.0, self.phi);
        (self.amplitude + self.tilt * (omega - self.omega_0)) * (self.phi.cos() - rot * inner).norm()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTrace {
    pub freqs: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub state: QubitState,
}

impl SpectrumTrace {
    pub fn validate(&self) -> Result<()> {
        if self.freqs.is_empty() || self.freqs.len() != self.magnitudes.len() {
            return Err(Error::Input(format!(
                "trace needs equal, non-empty columns ({} freqs, {} magnitudes)",
                self.freqs.len(),
                self.magnitudes.len()
            )));
        }
        if self.freqs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Input("trace frequencies must be strictly increasing".into()));
        }
        if self.magnitudes.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::Input("trace magnitudes must be finite and ≥ 0".into()));
        }
        Ok(())
    }
}

/// `n` points spanning `ω_p ± 5κ_p`.
pub fn default_grid(omega_p: f64, kappa_p: f64, n: usize) -> Vec<f64> {
    let (lo, hi) = (omega_p - 5.0 * kappa_p, omega_p + 5.0 * kappa_p);
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n.max(2) - 1) as f64).collect()
}

pub fn synth_spectrum(model: &SpectrumModel, freqs: &[f64], state: QubitState) -> Result<SpectrumTrace> {
    if freqs.is_empty() || freqs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Input("frequency grid must be non-empty and strictly increasing".into()));
    }
    Ok(SpectrumTrace {
        freqs: freqs.to_vec(),
        magnitudes: freqs.iter().map(|&w| model.magnitude(w, state)).collect(),
        state,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Dip {
    at: f64,
    depth: f64,
    width: f64,
}

fn find_dips(trace: &SpectrumTrace) -> Vec<Dip> {
    let n = trace.freqs.len();
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(2), (i + 3).min(n));
            trace.magnitudes[a..b].iter().sum::<f64>() / (b - a) as f64
        })
        .collect();
    let baseline = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let reach = (n / 200).max(3);
    let mut dips = Vec::new();
    for i in 0..n {
        let (a, b) = (i.saturating_sub(reach), (i + reach + 1).min(n));
        if i == 0 || i == n - 1 || y[a..b].iter().any(|&v| v < y[i]) {
            continue;
        }
        if dips.last().is_some_and(|d: &(usize, f64)| i - d.0 <= reach) {
            continue;
        }
        dips.push((i, y[i]));
    }
    let mut out: Vec<Dip> = dips
        .into_iter()
        .map(|(i, v)| {
            let half = 0.5 * (baseline + v);
            let mut l = i;
            while l > 0 && y[l] < half {
                l -= 1;
            }
            let mut r = i;
            while r < n - 1 && y[r] < half {
                r += 1;
            }
            Dip {
                at: trace.freqs[i],
                depth: baseline - v,
                width: trace.freqs[r] - trace.freqs[l],
            }
        })
        .collect();
    out.sort_by(|a, b| b.depth.total_cmp(&a.depth));
    out.truncate(2);
    out.sort_by(|a, b| a.at.total_cmp(&b.at));
    out
}

/// Starting point for [`fit_spectrum`] from the two deepest dips of each trace.
pub fn initial_guess(trace_g: &SpectrumTrace, trace_e: &SpectrumTrace) -> Result<SpectrumModel> {
    trace_g.validate()?;
    trace_e.validate()?;
    let summary = |t: &SpectrumTrace| -> Result<(f64, f64, f64)> {
        let dips = find_dips(t);
        match dips.as_slice() {
            [a, b] => Ok((a.at + b.at, b.at - a.at, a.width + b.width)),
            [a] => Ok((2.0 * a.at, a.width, a.width)),
            _ => Err(Error::Input(format!("no transmission dip found in the {} trace", t.state.label()))),
        }
    };
    let (sg, dg, wg) = summary(trace_g)?;
    let (se, de, _) = summary(trace_e)?;

    let (lo, hi) = (trace_g.freqs[0], *trace_g.freqs.last().unwrap());
    // ω_r + ω_p = ω_l + ω_h and (ω_h − ω_l)² ≈ (ω_r − ω_p)² + 4J² in each state
    let mut omega_p = 0.25 * (sg + se);
    if (sg - se).abs() > 1e-3 * wg {
        let x = 0.25 * (sg + se) - (dg * dg - de * de) / (4.0 * (sg - se));
        if x > lo && x < hi {
            omega_p = x;
        }
    }
    let (wrg, wre) = (sg - omega_p, se - omega_p);
    let j2 = 0.25 * (dg * dg - (wrg - omega_p).powi(2));
    let j = if j2 > 0.0 { j2.sqrt() } else { 0.5 * dg };

    let edge = trace_g.magnitudes[0].max(*trace_g.magnitudes.last().unwrap());
    Ok(SpectrumModel {
        amplitude: edge.max(f64::MIN_POSITIVE),
        tilt: 0.0,
        omega_0: 0.5 * (lo + hi),
        phi: 0.0,
        kappa_p: wg,
        j,
        omega_p,
        omega_r_g: wrg,
        omega_r_e: wre,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumFit {
    pub model: SpectrumModel,
    /// Parameter covariance in SI units (rad/s, 1/(rad/s), rad), ordered as [`PARAM_NAMES`].
    pub covariance: Vec<Vec<f64>>,
    pub std_errors: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub condition_number: f64,
    #[serde(skip)]
    pub cost_history: Vec<f64>,
    pub warnings: Vec<Warning>,
}

fn pack(m: &SpectrumModel) -> [f64; 8] {
    [
        m.amplitude,
        m.tilt * SCALE,
        m.phi,
        m.kappa_p / SCALE,
        m.j / SCALE,
        (m.omega_p - m.omega_0) / SCALE,
        (m.omega_r_g - m.omega_0) / SCALE,
        (m.omega_r_e - m.omega_0) / SCALE,
    ]
}

fn unpack(x: &[f64], omega_0: f64) -> SpectrumModel {
    SpectrumModel {
        amplitude: x[0],
        tilt: x[1] / SCALE,
        omega_0,
        phi: x[2],
        kappa_p: x[3] * SCALE,
        j: x[4] * SCALE,
        omega_p: omega_0 + x[5] * SCALE,
        omega_r_g: omega_0 + x[6] * SCALE,
        omega_r_e: omega_0 + x[7] * SCALE,
    }
}

fn wrap_phase(phi: f64) -> f64 {
    let w = (phi + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI { PI } else { w }
}

/// Joint least-squares fit of the g and e traces. Background and circuit
/// parameters are shared; `ω_r^g` and `ω_r^e` are separate; `ω_0` stays at its
/// initial value.
pub fn fit_spectrum(trace_g: &SpectrumTrace, trace_e: &SpectrumTrace, initial: &SpectrumModel) -> Result<SpectrumFit> {
    trace_g.validate()?;
    trace_e.validate()?;
    if trace_g.state != QubitState::Ground || trace_e.state != QubitState::Excited {
        return Err(Error::Input("fit_spectrum expects a ground-state and an excited-state trace".into()));
    }
    let mut start = *initial;
    start.phi = wrap_phase(start.phi);
    start.validate()?;
    let omega_0 = start.omega_0;
    let ng = trace_g.freqs.len();
    let m = ng + trace_e.freqs.len();

    let residuals = |x: &[f64], out: &mut [f64]| {
        let model = unpack(x, omega_0);
        for (k, (w, y)) in trace_g.freqs.iter().zip(&trace_g.magnitudes).enumerate() {
            out[k] = model.magnitude(*w, QubitState::Ground) - y;
        }
        for (k, (w, y)) in trace_e.freqs.iter().zip(&trace_e.magnitudes).enumerate() {
            out[ng + k] = model.magnitude(*w, QubitState::Excited) - y;
        }
    };
    let report = levenberg_marquardt(residuals, &pack(&start), m, LmOptions::default())?;

    let mut model = unpack(&report.params, omega_0);
    model.j = model.j.abs();
    model.phi = wrap_phase(model.phi);
    let unit = [1.0, 1.0 / SCALE, 1.0, SCALE, SCALE, SCALE, SCALE, SCALE];
    let cov = DMatrix::from_fn(8, 8, |i, j| report.covariance[(i, j)] * unit[i] * unit[j]);
    let mut warnings = Vec::new();
    if !(report.condition_number <= CONDITION_LIMIT) {
        warnings.push(Warning::Identifiability {
            condition_number: report.condition_number,
        });
    }
    Ok(SpectrumFit {
        model,
        std_errors: (0..8).map(|i| cov[(i, i)].max(0.0).sqrt()).collect(),
        covariance: (0..8).map(|i| (0..8).map(|j| cov[(i, j)]).collect()).collect(),
        residual_norm: report.residual_norm,
        iterations: report.iterations,
        condition_number: report.condition_number,
        cost_history: report.cost_history,
        warnings,
    })
}
