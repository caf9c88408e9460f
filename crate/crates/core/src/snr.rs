//! Integrated signal-to-noise ratio, the T1-limited assignment-error bound and the
//! choice of readout frequency.
//!
//! SNR is the power ratio `|μ_e − μ_g|² / ((σ_g + σ_e)/2)²`.

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::erfc;

use crate::calibration::drive_amplitude_from_photons;
use crate::dynamics::{integrate_eom, steady_state, DriveSpec, FieldTrajectory};
use crate::error::{Error, Result};
use crate::model::{derive_dispersive, n_crit, DeviceParams, DispersiveDerived};
use crate::normal_modes::exact_modes;
use crate::units::mhz;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReadoutMetrics {
    pub snr: f64,
    pub epsilon_a: f64,
    pub overlap_error: f64,
    pub t1_error: f64,
    /// rad/s
    pub omega_d_opt: f64,
    pub n_g: f64,
    pub n_e: f64,
}

/// Assignment-error lower bound split into its Gaussian-overlap and decay parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AssignmentBound {
    pub overlap: f64,
    pub t1: f64,
    pub total: f64,
}

/// `ε_a ≳ ½ erfc(√(SNR/8)) + τ/2T1`.
pub fn assignment_error_bound(snr: f64, tau: f64, t1: f64) -> AssignmentBound {
    let overlap = 0.5 * erfc((snr.max(0.0) / 8.0).sqrt());
    let t1_term = tau / (2.0 * t1);
    AssignmentBound {
        overlap,
        t1: t1_term,
        total: overlap + t1_term,
    }
}

/// Cumulative `SNR(t) = 2ηκ_p ∫₀ᵗ |β_e − β_g|² dt′` on the trajectory grid (trapezoidal).
pub fn snr_curve(trajectory: &FieldTrajectory, params: &DeviceParams) -> Vec<f64> {
    let pref = 2.0 * params.eta * params.kappa_p;
    let sep: Vec<f64> = trajectory
        .beta_e
        .iter()
        .zip(&trajectory.beta_g)
        .map(|(e, g)| (e - g).norm_sqr())
        .collect();
    let mut out = Vec::with_capacity(sep.len());
    let mut acc = 0.0;
    if !sep.is_empty() {
        out.push(0.0);
    }
    for k in 1..sep.len() {
        acc += 0.5 * (sep[k] + sep[k - 1]) * (trajectory.times[k] - trajectory.times[k - 1]);
        out.push(pref * acc);
    }
    out
}

/// SNR accumulated over `[0, tau]`; a final partial interval is integrated with the
/// linearly interpolated integrand.
pub fn snr_integral(trajectory: &FieldTrajectory, params: &DeviceParams, tau: f64) -> Result<f64> {
    let end = trajectory.end_time();
    if trajectory.len() < 2 || end < tau * (1.0 - 1e-12) {
        return Err(Error::Span {
            available: end,
            requested: tau,
        });
    }
    let t = &trajectory.times;
    let sep = |k: usize| (trajectory.beta_e[k] - trajectory.beta_g[k]).norm_sqr();
    let mut acc = 0.0;
    for k in 1..t.len() {
        if t[k] <= tau {
            acc += 0.5 * (sep(k) + sep(k - 1)) * (t[k] - t[k - 1]);
            continue;
        }
        if t[k - 1] < tau {
            let h = tau - t[k - 1];
            let frac = h / (t[k] - t[k - 1]);
            let mid = sep(k - 1) + frac * (sep(k) - sep(k - 1));
            acc += 0.5 * (sep(k - 1) + mid) * h;
        }
        break;
    }
    Ok(2.0 * params.eta * params.kappa_p * acc)
}

/// `(n_g, n_e) = (|α_ss^g|², |α_ss^e|²)`.
pub fn photon_numbers(derived: &DispersiveDerived, params: &DeviceParams, drive: &DriveSpec) -> (f64, f64) {
    let ss = steady_state(derived, params, drive);
    (ss.alpha_g.norm_sqr(), ss.alpha_e.norm_sqr())
}

/// Steady-state pointer separation `|β_ss^e − β_ss^g|` per unit drive at `omega_d`.
pub fn pointer_separation(derived: &DispersiveDerived, params: &DeviceParams, omega_d: f64) -> f64 {
    let drive = DriveSpec::constant(omega_d, 1.0, 1.0);
    let ss = steady_state(derived, params, &drive);
    (ss.beta_e - ss.beta_g).norm()
}

/// Search window around the low mode: from `2κ_p` below it up to the midpoint
/// between the low and high modes.
pub fn low_mode_window(derived: &DispersiveDerived, params: &DeviceParams) -> (f64, f64) {
    let m = exact_modes(derived, params);
    let low = m.omega_l_g.min(m.omega_l_e);
    let lo = low - 2.0 * params.kappa_p;
    let hi = 0.5 * (m.omega_l_g.max(m.omega_l_e) + m.omega_h_g.min(m.omega_h_e));
    (lo, hi)
}

const GRID_POINTS: usize = 1001;

/// Drive frequency maximizing the steady-state pointer separation inside `window`:
/// 1001-point grid search followed by golden-section refinement.
pub fn optimal_drive_frequency(derived: &DispersiveDerived, params: &DeviceParams, window: (f64, f64)) -> Result<f64> {
    let (lo, hi) = window;
    if !(hi > lo) {
        return Err(Error::Input("search window must have hi > lo".into()));
    }
    let f = |w: f64| pointer_separation(derived, params, w);
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    let (best, _) = (0..GRID_POINTS)
        .map(|k| (k, f(lo + step * k as f64)))
        .fold((0, f64::NEG_INFINITY), |acc, (k, v)| if v > acc.1 { (k, v) } else { acc });
    if best == 0 || best == GRID_POINTS - 1 {
        return Err(Error::Window {
            at_hz: crate::units::to_hz(lo + step * best as f64),
        });
    }
    Ok(golden_max(f, lo + step * (best - 1) as f64, lo + step * (best + 1) as f64, 1e-3))
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Linear-response prediction for one operating point, readout pulse and power.
#[derive(Debug, Clone, Serialize)]
pub struct ReadoutPrediction {
    pub omega_d: f64,
    pub amplitude: f64,
    pub n_crit: f64,
    pub metrics: ReadoutMetrics,
    #[serde(skip)]
    pub trajectory: FieldTrajectory,
}

/// Drives the low mode at its optimal frequency with the power that gives
/// `n_g = n_over_ncrit · n_crit`, integrates the readout pulse and evaluates the SNR
/// over `tau`.
pub fn predict_readout(
    params: &DeviceParams,
    derived: &DispersiveDerived,
    n_over_ncrit: f64,
    tau: f64,
    dt: f64,
) -> Result<ReadoutPrediction> {
    let omega_d = optimal_drive_frequency(derived, params, low_mode_window(derived, params))?;
    let nc = n_crit(params, derived)?;
    let amplitude = drive_amplitude_from_photons(n_over_ncrit * nc, derived, params, omega_d)?;
    let drive = DriveSpec::readout_pulse(omega_d, amplitude, tau);
    let trajectory = integrate_eom(derived, params, &drive, dt)?;
    let snr = snr_integral(&trajectory, params, tau)?;
    let bound = assignment_error_bound(snr, tau, params.t1);
    let (n_g, n_e) = photon_numbers(derived, params, &drive);
    Ok(ReadoutPrediction {
        omega_d,
        amplitude,
        n_crit: nc,
        metrics: ReadoutMetrics {
            snr,
            epsilon_a: bound.total,
            overlap_error: bound.overlap,
            t1_error: bound.t1,
            omega_d_opt: omega_d,
            n_g,
            n_e,
        },
        trajectory,
    })
}

/// Lower/upper SNR estimates from ±1 MHz shifts of g, J, ω_r and κ_p (all 16 corners)
/// and a ±5 % change of η. The drive frequency and amplitude are held at the nominal
/// prediction's values.
pub fn snr_band(params: &DeviceParams, nominal: &ReadoutPrediction, tau: f64, dt: f64) -> Result<(f64, f64)> {
    let shift = mhz(1.0);
    let corners: Vec<[f64; 4]> = (0..16)
        .map(|bits: u32| {
            let s = |b: u32| if bits >> b & 1 == 1 { shift } else { -shift };
            [s(0), s(1), s(2), s(3)]
        })
        .collect();
    let values = corners
        .par_iter()
        .map(|c| {
            let mut p = *params;
            p.g_charge += c[0];
            p.j += c[1];
            p.omega_r_bare += c[2];
            if let Some(w) = p.omega_r_dressed.as_mut() {
                *w += c[2];
            }
            p.kappa_p += c[3];
            let d = derive_dispersive(&p, None)?;
            let drive = DriveSpec::readout_pulse(nominal.omega_d, nominal.amplitude, tau);
            let tr = integrate_eom(&d, &p, &drive, dt)?;
            snr_integral(&tr, &p, tau)
        })
        .collect::<Result<Vec<f64>>>()?;
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min) * 0.95;
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max) * 1.05;
    Ok((lo, hi))
}

/// `|β_e(t) − β_g(t)|²` samples.
pub fn separation(trajectory: &FieldTrajectory) -> Vec<f64> {
    trajectory
        .beta_e
        .iter()
        .zip(&trajectory.beta_g)
        .map(|(e, g)| (e - g).norm_sqr())
        .collect()
}
