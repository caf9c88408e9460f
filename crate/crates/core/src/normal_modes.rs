//! Hybridized low/high readout modes of the resonator–filter pair.
//!
//! The undriven dynamical matrix `[[ω_r, J], [J, ω_p − iκ_p/2]]` has eigenvalues
//! `λ = ω − iκ/2`. Modes are labelled by ascending real part for each qubit state.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, Warning};
use crate::model::{derive_dispersive, omega_q_for_detuning, DeviceParams, DispersiveDerived, QubitState};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalModes {
    pub omega_l_g: f64,
    pub omega_l_e: f64,
    pub omega_h_g: f64,
    pub omega_h_e: f64,
    pub kappa_l_g: f64,
    pub kappa_l_e: f64,
    pub kappa_h_g: f64,
    pub kappa_h_e: f64,
    pub chi_l: f64,
    pub chi_h: f64,
    /// `[λ_l^g, λ_h^g, λ_l^e, λ_h^e]` in rad/s.
    pub eigvals: [Complex64; 4],
    pub warnings: Vec<Warning>,
}

/// Eigenvalues of one qubit state, as offsets from ω_p, labelled (low, high).
#[derive(Debug, Clone, Copy)]
struct Pair {
    low: Complex64,
    high: Complex64,
}

fn pair_offsets(delta_rp: f64, j: f64, kappa_p: f64) -> (Complex64, Complex64) {
    let center = Complex64::new(delta_rp, -kappa_p / 2.0) / 2.0;
    let z = Complex64::new(delta_rp, kappa_p / 2.0);
    let half_split = (z * z + 4.0 * j * j).sqrt() / 2.0;
    (center - half_split, center + half_split)
}

fn ordered(a: Complex64, b: Complex64) -> Pair {
    if a.re <= b.re {
        Pair { low: a, high: b }
    } else {
        Pair { low: b, high: a }
    }
}

/// The two eigenvalues `λ_±` of the undriven matrix for one qubit state (rad/s, lab frame),
/// in the branch order of the principal square root: `(c − d/2, c + d/2)`.
pub fn eigen_pair(derived: &DispersiveDerived, params: &DeviceParams, state: QubitState) -> (Complex64, Complex64) {
    let delta_rp = delta_rp(derived, state);
    let (m, p) = pair_offsets(delta_rp, derived.j_eff(state), params.kappa_p);
    (m + params.omega_p, p + params.omega_p)
}

fn delta_rp(derived: &DispersiveDerived, state: QubitState) -> f64 {
    match state {
        QubitState::Ground => derived.delta_rp_g,
        QubitState::Excited => derived.delta_rp_g + 2.0 * derived.chi,
    }
}

fn assemble(wp: f64, g: Pair, e: Pair, warnings: Vec<Warning>) -> NormalModes {
    NormalModes {
        omega_l_g: wp + g.low.re,
        omega_l_e: wp + e.low.re,
        omega_h_g: wp + g.high.re,
        omega_h_e: wp + e.high.re,
        kappa_l_g: -2.0 * g.low.im,
        kappa_l_e: -2.0 * e.low.im,
        kappa_h_g: -2.0 * g.high.im,
        kappa_h_e: -2.0 * e.high.im,
        chi_l: (e.low.re - g.low.re) / 2.0,
        chi_h: (e.high.re - g.high.re) / 2.0,
        eigvals: [g.low + wp, g.high + wp, e.low + wp, e.high + wp],
        warnings,
    }
}

fn exact_pair(derived: &DispersiveDerived, params: &DeviceParams, state: QubitState) -> Pair {
    let (a, b) = pair_offsets(delta_rp(derived, state), derived.j_eff(state), params.kappa_p);
    ordered(a, b)
}

/// Exact normal modes using the state-dependent couplings `J^{g/e}`.
pub fn exact_modes(derived: &DispersiveDerived, params: &DeviceParams) -> NormalModes {
    let g = exact_pair(derived, params, QubitState::Ground);
    let e = exact_pair(derived, params, QubitState::Excited);
    assemble(params.omega_p, g, e, Vec::new())
}

/// Exact modes from circuit values alone, e.g. a fitted spectrum: `omega_r` and `j`
/// are `[ground, excited]`.
pub fn modes_from_circuit(omega_r: [f64; 2], j: [f64; 2], omega_p: f64, kappa_p: f64) -> NormalModes {
    let pair = |k: usize| {
        let (a, b) = pair_offsets(omega_r[k] - omega_p, j[k], kappa_p);
        ordered(a, b)
    };
    assemble(omega_p, pair(0), pair(1), Vec::new())
}

/// First-order expansion of the eigenvalues in `(Δ_rp + iκ_p/2)/2J`, taking `J^{g/e} ≈ J`.
pub fn approx_modes(derived: &DispersiveDerived, params: &DeviceParams) -> NormalModes {
    let j = params.j;
    let kappa = params.kappa_p;
    let mut warnings = Vec::new();
    if kappa > 2.0 * j {
        warnings.push(Warning::ExpansionValidity {
            detail: format!("κ_p/4J = {:.3} is not small", kappa / (4.0 * j)),
        });
    }
    let mut pair = |state: QubitState| {
        let d = delta_rp(derived, state);
        if d.abs() >= 2.0 * j {
            warnings.push(Warning::ExpansionValidity {
                detail: format!("|Δ_rp^{}| ≥ 2J", state.label()),
            });
        }
        let center = Complex64::new(d, -kappa / 2.0) / 2.0;
        let z = Complex64::new(d, kappa / 2.0);
        let half_split = Complex64::new(j, 0.0) + z * z / (8.0 * j);
        Pair {
            low: center - half_split,
            high: center + half_split,
        }
    };
    let g = pair(QubitState::Ground);
    let e = pair(QubitState::Excited);
    assemble(params.omega_p, g, e, warnings)
}

/// One row of a detuning sweep.
#[derive(Debug, Clone, Serialize)]
pub struct ModeSweepPoint {
    pub detuning: f64,
    pub derived: DispersiveDerived,
    pub modes: NormalModes,
}

/// Exact modes over a grid of dressed qubit–resonator detunings `ω_q − ω_r^g`.
///
/// Points are computed in parallel; output order follows the grid. Where the two
/// real parts of a state tie (no avoided crossing), labels follow continuity with
/// the previous grid point.
pub fn sweep_modes(params: &DeviceParams, detunings: &[f64]) -> Result<Vec<ModeSweepPoint>> {
    let mut points = detunings
        .par_iter()
        .map(|&detuning| {
            let wq = omega_q_for_detuning(params, detuning)?;
            let derived = derive_dispersive(params, Some(wq))?;
            let modes = exact_modes(&derived, params);
            Ok(ModeSweepPoint {
                detuning,
                derived,
                modes,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    track_branches(&mut points, params.kappa_p);
    Ok(points)
}

fn track_branches(points: &mut [ModeSweepPoint], kappa_p: f64) {
    let tie = 1e-9 * kappa_p;
    for i in 1..points.len() {
        let prev = points[i - 1].modes.eigvals;
        let cur = &mut points[i].modes;
        let mut changed = false;
        for (lo, hi) in [(0usize, 1usize), (2, 3)] {
            let (a, b) = (cur.eigvals[lo], cur.eigvals[hi]);
            if (a.re - b.re).abs() > tie {
                continue;
            }
            let keep = (a - prev[lo]).norm() + (b - prev[hi]).norm();
            let swap = (b - prev[lo]).norm() + (a - prev[hi]).norm();
            if swap < keep {
                cur.eigvals.swap(lo, hi);
                changed = true;
            }
        }
        if changed {
            let [lg, hg, le, he] = cur.eigvals;
            cur.omega_l_g = lg.re;
            cur.omega_h_g = hg.re;
            cur.omega_l_e = le.re;
            cur.omega_h_e = he.re;
            cur.kappa_l_g = -2.0 * lg.im;
            cur.kappa_h_g = -2.0 * hg.im;
            cur.kappa_l_e = -2.0 * le.im;
            cur.kappa_h_e = -2.0 * he.im;
            cur.chi_l = (le.re - lg.re) / 2.0;
            cur.chi_h = (he.re - hg.re) / 2.0;
        }
    }
}
