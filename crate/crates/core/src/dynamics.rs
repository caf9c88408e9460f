//! Driven linear dynamics of the resonator (α) and filter (β) fields in the frame
//! rotating at the drive frequency:
//!
//! ```text
//! d/dt [α, β] = −i [[ω_r − ω_d, J], [J, ω_p − ω_d − iκ_p/2]] [α, β] + [0, i𝓔(t)]
//! ```
//!
//! The drive phase is chosen so that the steady-state and transient closed forms
//! below hold without an extra global phase.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::model::{DeviceParams, DispersiveDerived, QubitState};
use crate::normal_modes::eigen_pair;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Default RK4 step.
pub const DEFAULT_DT: f64 = 0.05e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Envelope {
    /// Switched on at t = 0 and held.
    Constant,
    /// Rectangle of length `duration` convolved with a Gaussian of width `sigma`.
    ///
    /// The rectangle's leading edge sits at `4σ` so the envelope starts from ≈0.
    GaussianFilteredRect { sigma: f64 },
}

impl Envelope {
    pub fn value(&self, t: f64, duration: f64) -> f64 {
        match *self {
            Envelope::Constant => {
                if t >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Envelope::GaussianFilteredRect { sigma } => {
                if sigma == 0.0 {
                    return if (0.0..duration).contains(&t) { 1.0 } else { 0.0 };
                }
                let t0 = 4.0 * sigma;
                let s = std::f64::consts::SQRT_2 * sigma;
                0.5 * (erf((t - t0) / s) - erf((t - t0 - duration) / s))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSpec {
    pub omega_d: f64,
    /// 𝓔 in rad/s.
    pub amplitude: f64,
    /// Global drive phase (rad).
    pub phase: f64,
    pub envelope: Envelope,
    pub duration: f64,
    /// Integration window.
    pub tau: f64,
}

impl DriveSpec {
    pub fn constant(omega_d: f64, amplitude: f64, duration: f64) -> Self {
        DriveSpec {
            omega_d,
            amplitude,
            phase: 0.0,
            envelope: Envelope::Constant,
            duration,
            tau: duration,
        }
    }

    /// 450 ns rectangle with a 0.5 ns Gaussian filter, the pulse used for single-shot readout.
    pub fn readout_pulse(omega_d: f64, amplitude: f64, tau: f64) -> Self {
        DriveSpec {
            omega_d,
            amplitude,
            phase: 0.0,
            envelope: Envelope::GaussianFilteredRect { sigma: 0.5e-9 },
            duration: 450e-9_f64.max(tau),
            tau,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || self.duration < self.tau {
            return Err(Error::Input(format!(
                "drive requires duration ≥ tau > 0 (duration {:.3e} s, tau {:.3e} s)",
                self.duration, self.tau
            )));
        }
        if let Envelope::GaussianFilteredRect { sigma } = self.envelope {
            if !(sigma >= 0.0) {
                return Err(Error::Input(format!("envelope sigma must be ≥ 0 (got {sigma})")));
            }
        }
        if !self.amplitude.is_finite() || !self.omega_d.is_finite() {
            return Err(Error::Input("drive amplitude and frequency must be finite".into()));
        }
        Ok(())
    }

    pub fn complex_amplitude(&self) -> Complex64 {
        Complex64::from_polar(self.amplitude, self.phase)
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }
}

/// Sampled coherent fields for both qubit preparations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FieldTrajectory {
    pub times: Vec<f64>,
    pub alpha_g: Vec<Complex64>,
    pub alpha_e: Vec<Complex64>,
    pub beta_g: Vec<Complex64>,
    pub beta_e: Vec<Complex64>,
}

impl FieldTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn end_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn beta(&self, state: QubitState) -> &[Complex64] {
        match state {
            QubitState::Ground => &self.beta_g,
            QubitState::Excited => &self.beta_e,
        }
    }

    pub fn alpha(&self, state: QubitState) -> &[Complex64] {
        match state {
            QubitState::Ground => &self.alpha_g,
            QubitState::Excited => &self.alpha_e,
        }
    }

    /// Keeps at most `max_points` samples, evenly strided, always including the last.
    pub fn decimated(&self, max_points: usize) -> FieldTrajectory {
        let n = self.len();
        if n <= max_points || max_points < 2 {
            return self.clone();
        }
        let stride = (n - 1).div_ceil(max_points - 1);
        let mut idx: Vec<usize> = (0..n).step_by(stride).collect();
        if *idx.last().unwrap() != n - 1 {
            idx.push(n - 1);
        }
        let pick = |v: &[Complex64]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        FieldTrajectory {
            times: idx.iter().map(|&i| self.times[i]).collect(),
            alpha_g: pick(&self.alpha_g),
            alpha_e: pick(&self.alpha_e),
            beta_g: pick(&self.beta_g),
            beta_e: pick(&self.beta_e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub alpha_g: Complex64,
    pub beta_g: Complex64,
    pub alpha_e: Complex64,
    pub beta_e: Complex64,
}

impl SteadyState {
    pub fn alpha(&self, state: QubitState) -> Complex64 {
        match state {
            QubitState::Ground => self.alpha_g,
            QubitState::Excited => self.alpha_e,
        }
    }

    pub fn beta(&self, state: QubitState) -> Complex64 {
        match state {
            QubitState::Ground => self.beta_g,
            QubitState::Excited => self.beta_e,
        }
    }
}

/// Detunings `(ω_r^s − ω_d, ω_p − ω_d)` and coupling for one state.
fn frame(derived: &DispersiveDerived, params: &DeviceParams, omega_d: f64, state: QubitState) -> (f64, f64, f64) {
    let delta_p = params.omega_p - omega_d;
    let delta_r = match state {
        QubitState::Ground => derived.delta_rp_g + delta_p,
        QubitState::Excited => derived.delta_rp_g + 2.0 * derived.chi + delta_p,
    };
    (delta_r, delta_p, derived.j_eff(state))
}

fn steady_one(derived: &DispersiveDerived, params: &DeviceParams, drive: &DriveSpec, state: QubitState) -> (Complex64, Complex64) {
    let (dr, dp, j) = frame(derived, params, drive.omega_d, state);
    let e = drive.complex_amplitude();
    let den = dr * Complex64::new(dp, -params.kappa_p / 2.0) - j * j;
    (-j * e / den, dr * e / den)
}

/// Steady-state fields `[α, β] = 𝓔 [−J, Δ] / (Δ(Δ_p − iκ_p/2) − J²)`.
pub fn steady_state(derived: &DispersiveDerived, params: &DeviceParams, drive: &DriveSpec) -> SteadyState {
    let (alpha_g, beta_g) = steady_one(derived, params, drive, QubitState::Ground);
    let (alpha_e, beta_e) = steady_one(derived, params, drive, QubitState::Excited);
    SteadyState {
        alpha_g,
        beta_g,
        alpha_e,
        beta_e,
    }
}

/// Closed-form filter field `β(t)` after a constant drive is switched on at t = 0.
pub fn closed_form_response(
    derived: &DispersiveDerived,
    params: &DeviceParams,
    drive: &DriveSpec,
    t: f64,
) -> Result<(Complex64, Complex64)> {
    if drive.envelope != Envelope::Constant {
        return Err(Error::Input("closed-form response needs a constant envelope".into()));
    }
    let ss = steady_state(derived, params, drive);
    let mut out = [Complex64::default(); 2];
    for (slot, state) in out.iter_mut().zip(QubitState::BOTH) {
        let (dr, _, _) = frame(derived, params, drive.omega_d, state);
        let (lm, lp) = eigen_pair(derived, params, state);
        // offsets from the drive frequency, λ − ω_d
        let mu_m = lm - drive.omega_d;
        let mu_p = lp - drive.omega_d;
        let d = mu_p - mu_m;
        if d.norm() < 1e-6 * params.kappa_p {
            return Err(Error::DegenerateMode { gap: d.norm() });
        }
        let e = drive.complex_amplitude();
        let term = |mu: Complex64| e * (mu - dr) / d * (-I * mu * t).exp() / mu;
        *slot = ss.beta(state) - term(mu_p) + term(mu_m);
    }
    Ok((out[0], out[1]))
}

/// Largest step accepted by [`integrate_eom`].
pub fn max_step(derived: &DispersiveDerived, params: &DeviceParams, omega_d: f64) -> f64 {
    let mut rate = params.kappa_p.max(params.j);
    for state in QubitState::BOTH {
        let (dr, dp, j) = frame(derived, params, omega_d, state);
        rate = rate.max(dr.abs()).max(dp.abs()).max(j.abs());
    }
    0.1 / rate
}

/// Fixed-step RK4 integration from vacuum over `[0, drive.duration]`.
pub fn integrate_eom(
    derived: &DispersiveDerived,
    params: &DeviceParams,
    drive: &DriveSpec,
    dt: f64,
) -> Result<FieldTrajectory> {
    drive.validate()?;
    let limit = max_step(derived, params, drive.omega_d);
    if !(dt > 0.0) || dt >= limit {
        return Err(Error::StepSize { dt, limit });
    }
    let steps = (drive.duration / dt).round() as usize;
    let e0 = drive.complex_amplitude();
    let kappa = params.kappa_p;

    let mut traj = FieldTrajectory {
        times: (0..=steps).map(|k| k as f64 * dt).collect(),
        ..Default::default()
    };

    for state in QubitState::BOTH {
        let (dr, dp, j) = frame(derived, params, drive.omega_d, state);
        let zf = Complex64::new(dp, -kappa / 2.0);
        let rhs = |t: f64, a: Complex64, b: Complex64| {
            let drive_term = I * e0 * drive.envelope.value(t, drive.duration);
            (-I * (dr * a + j * b), -I * (j * a + zf * b) + drive_term)
        };
        let mut a = Complex64::default();
        let mut b = Complex64::default();
        let mut alphas = Vec::with_capacity(steps + 1);
        let mut betas = Vec::with_capacity(steps + 1);
        alphas.push(a);
        betas.push(b);
        for k in 0..steps {
            let t = k as f64 * dt;
            let (ka1, kb1) = rhs(t, a, b);
            let (ka2, kb2) = rhs(t + dt / 2.0, a + ka1 * (dt / 2.0), b + kb1 * (dt / 2.0));
            let (ka3, kb3) = rhs(t + dt / 2.0, a + ka2 * (dt / 2.0), b + kb2 * (dt / 2.0));
            let (ka4, kb4) = rhs(t + dt, a + ka3 * dt, b + kb3 * dt);
            a += (ka1 + 2.0 * ka2 + 2.0 * ka3 + ka4) * (dt / 6.0);
            b += (kb1 + 2.0 * kb2 + 2.0 * kb3 + kb4) * (dt / 6.0);
            alphas.push(a);
            betas.push(b);
        }
        match state {
            QubitState::Ground => {
                traj.alpha_g = alphas;
                traj.beta_g = betas;
            }
            QubitState::Excited => {
                traj.alpha_e = alphas;
                traj.beta_e = betas;
            }
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::derive_dispersive;
    use crate::presets::TABLE_ONE;
    use crate::units::{mhz, NS};

    fn setup(i: usize) -> (DeviceParams, DispersiveDerived, DriveSpec) {
        let p = TABLE_ONE[i].device();
        let d = derive_dispersive(&p, None).unwrap();
        let drive = DriveSpec::constant(mhz(TABLE_ONE[i].omega_d_mhz), mhz(5.0), 200.0 * NS);
        (p, d, drive)
    }

    /// Independent oracle: x(t) = (e^{At} − I) A⁻¹ b with a Taylor/scaling-squaring
    /// matrix exponential on the 2×2 system.
    fn expm_oracle(a: [[Complex64; 2]; 2], b: [Complex64; 2], t: f64) -> [Complex64; 2] {
        type M = [[Complex64; 2]; 2];
        let mul = |x: &M, y: &M| -> M {
            let mut z = [[Complex64::default(); 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    z[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
                }
            }
            z
        };
        let norm = a.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max) * t;
        let s = (norm.log2().ceil().max(0.0) as i32) + 4;
        let h = t / 2f64.powi(s);
        let x: M = [[a[0][0] * h, a[0][1] * h], [a[1][0] * h, a[1][1] * h]];
        let mut term: M = [[Complex64::new(1.0, 0.0), Complex64::default()], [Complex64::default(), Complex64::new(1.0, 0.0)]];
        let mut sum = term;
        for k in 1..30 {
            term = mul(&term, &x);
            for r in term.iter_mut().flatten() {
                *r /= k as f64;
            }
            for i in 0..2 {
                for j in 0..2 {
                    sum[i][j] += term[i][j];
                }
            }
        }
        for _ in 0..s {
            sum = mul(&sum, &sum);
        }
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let ainv_b = [
            (a[1][1] * b[0] - a[0][1] * b[1]) / det,
            (-a[1][0] * b[0] + a[0][0] * b[1]) / det,
        ];
        let one = Complex64::new(1.0, 0.0);
        [
            (sum[0][0] - one) * ainv_b[0] + sum[0][1] * ainv_b[1],
            sum[1][0] * ainv_b[0] + (sum[1][1] - one) * ainv_b[1],
        ]
    }

    #[test]
    fn steady_state_without_drive_is_vacuum() {
        let (p, d, drive) = setup(4);
        let ss = steady_state(&d, &p, &drive.with_amplitude(0.0));
        for z in [ss.alpha_g, ss.beta_g, ss.alpha_e, ss.beta_e] {
            assert_eq!(z, Complex64::default());
        }
    }

    #[test]
    fn decoupled_filter_is_a_lorentzian() {
        let (p, mut d, drive) = setup(4);
        d.j_eff_g = 0.0;
        d.j_eff_e = 0.0;
        let ss = steady_state(&d, &p, &drive);
        let expected = drive.amplitude / Complex64::new(p.omega_p - drive.omega_d, -p.kappa_p / 2.0);
        assert!(ss.alpha_g.norm() == 0.0 && ss.alpha_e.norm() == 0.0);
        assert!((ss.beta_g - expected).norm() < 1e-12 * expected.norm());
    }

    #[test]
    fn excited_state_rings_up_more_at_reference_frequency() {
        let (p, d, drive) = setup(0);
        let unit = steady_state(&d, &p, &drive.with_amplitude(1.0));
        let amp = 1.0 / unit.alpha_g.norm();
        let ss = steady_state(&d, &p, &drive.with_amplitude(amp));
        assert!((ss.alpha_g.norm_sqr() - 1.0).abs() < 1e-12);
        assert!(ss.alpha_e.norm_sqr() > ss.alpha_g.norm_sqr());
    }

    #[test]
    fn steady_state_solves_the_equations_of_motion() {
        let (p, d, drive) = setup(2);
        let ss = steady_state(&d, &p, &drive);
        for state in QubitState::BOTH {
            let (dr, dp, j) = frame(&d, &p, drive.omega_d, state);
            let (a, b) = (ss.alpha(state), ss.beta(state));
            let da = -I * (dr * a + j * b);
            let db = -I * (j * a + Complex64::new(dp, -p.kappa_p / 2.0) * b) + I * drive.amplitude;
            assert!(da.norm() < 1e-9 * drive.amplitude && db.norm() < 1e-9 * drive.amplitude);
        }
    }

    #[test]
    fn closed_form_starts_from_vacuum() {
        for i in 0..5 {
            let (p, d, drive) = setup(i);
            let (bg, be) = closed_form_response(&d, &p, &drive, 0.0).unwrap();
            let scale = steady_state(&d, &p, &drive).beta_g.norm();
            assert!(bg.norm() < 1e-12 * scale && be.norm() < 1e-12 * scale);
        }
    }

    #[test]
    fn closed_form_settles() {
        let (p, d, drive) = setup(4);
        let m = crate::normal_modes::exact_modes(&d, &p);
        let slowest = [m.kappa_l_g, m.kappa_h_g, m.kappa_l_e, m.kappa_h_e].into_iter().fold(f64::INFINITY, f64::min);
        let t = 40.0 / slowest;
        let ss = steady_state(&d, &p, &drive);
        let (bg, be) = closed_form_response(&d, &p, &drive, t).unwrap();
        assert!((bg - ss.beta_g).norm() < 1e-4 * ss.beta_g.norm());
        assert!((be - ss.beta_e).norm() < 1e-4 * ss.beta_e.norm());
    }

    #[test]
    fn closed_form_matches_matrix_exponential() {
        for i in 0..5 {
            let (p, d, drive) = setup(i);
            for state in QubitState::BOTH {
                let (dr, dp, j) = frame(&d, &p, drive.omega_d, state);
                let a = [
                    [-I * dr, -I * j],
                    [-I * j, -I * Complex64::new(dp, -p.kappa_p / 2.0)],
                ];
                let b = [Complex64::default(), I * drive.amplitude];
                for k in 0..50 {
                    let t = k as f64 * 4.0 * NS;
                    let oracle = expm_oracle(a, b, t)[1];
                    let (bg, be) = closed_form_response(&d, &p, &drive, t).unwrap();
                    let cf = if state == QubitState::Ground { bg } else { be };
                    let scale = oracle.norm().max(1e-3 * drive.amplitude / p.kappa_p);
                    assert!((cf - oracle).norm() < 1e-9 * scale, "t={t} {cf} vs {oracle}");
                }
            }
        }
    }

    #[test]
    fn closed_form_rejects_degenerate_modes() {
        let (mut p, mut d, drive) = setup(3);
        // exceptional point: Δ_rp = 0, 4J = κ_p
        p.j = p.kappa_p / 4.0;
        d.j_eff_g = p.j;
        d.j_eff_e = p.j;
        d.delta_rp_g = 0.0;
        d.chi = 0.0;
        let r = closed_form_response(&d, &p, &drive, 1e-9);
        assert!(matches!(r, Err(Error::DegenerateMode { .. })));
    }

    #[test]
    fn rk4_agrees_with_closed_form() {
        for i in 0..5 {
            let (p, d, drive) = setup(i);
            let traj = integrate_eom(&d, &p, &drive, DEFAULT_DT).unwrap();
            let stride = traj.len() / 50;
            for k in (stride..traj.len()).step_by(stride) {
                let (bg, be) = closed_form_response(&d, &p, &drive, traj.times[k]).unwrap();
                assert!((traj.beta_g[k] - bg).norm() < 1e-6 * bg.norm());
                assert!((traj.beta_e[k] - be).norm() < 1e-6 * be.norm());
            }
        }
    }

    #[test]
    fn zero_drive_gives_zero_trajectory() {
        let (p, d, drive) = setup(1);
        let drive = DriveSpec::readout_pulse(drive.omega_d, 0.0, 100.0 * NS);
        let traj = integrate_eom(&d, &p, &drive, DEFAULT_DT).unwrap();
        assert!(traj.beta_g.iter().chain(&traj.alpha_e).all(|z| z.norm() == 0.0));
    }

    #[test]
    fn trajectories_are_linear_in_drive() {
        let (p, d, drive) = setup(3);
        let drive = DriveSpec::readout_pulse(drive.omega_d, mhz(3.0), 100.0 * NS);
        let one = integrate_eom(&d, &p, &drive, DEFAULT_DT).unwrap();
        let two = integrate_eom(&d, &p, &drive.with_amplitude(2.0 * drive.amplitude), DEFAULT_DT).unwrap();
        for k in 0..one.len() {
            assert!((two.beta_g[k] - 2.0 * one.beta_g[k]).norm() <= 1e-12 * (1.0 + one.beta_g[k].norm()));
            assert!((two.alpha_e[k] - 2.0 * one.alpha_e[k]).norm() <= 1e-12 * (1.0 + one.alpha_e[k].norm()));
        }
    }

    #[test]
    fn photon_numbers_ignore_drive_phase() {
        let (p, d, drive) = setup(3);
        let mut rotated = drive;
        rotated.phase = 1.234;
        let a = integrate_eom(&d, &p, &drive, DEFAULT_DT).unwrap();
        let b = integrate_eom(&d, &p, &rotated, DEFAULT_DT).unwrap();
        for k in (0..a.len()).step_by(97) {
            assert!((a.beta_e[k].norm_sqr() - b.beta_e[k].norm_sqr()).abs() < 1e-12 * (1.0 + a.beta_e[k].norm_sqr()));
            assert!((a.alpha_g[k].norm_sqr() - b.alpha_g[k].norm_sqr()).abs() < 1e-12 * (1.0 + a.alpha_g[k].norm_sqr()));
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        let (p, d, mut drive) = setup(4);
        drive.duration = 30.0 * NS;
        drive.tau = drive.duration;
        let (exact, _) = closed_form_response(&d, &p, &drive, drive.duration).unwrap();
        let limit = max_step(&d, &p, drive.omega_d);
        let coarse = drive.duration / (drive.duration / (0.95 * limit)).ceil();
        let err = |dt: f64| {
            let tr = integrate_eom(&d, &p, &drive, dt).unwrap();
            (tr.beta_g.last().unwrap() - exact).norm()
        };
        let e1 = err(coarse);
        let e2 = err(coarse / 2.0);
        assert!(e1 / e2 >= 8.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn oversized_step_is_rejected() {
        let (p, d, drive) = setup(0);
        assert!(matches!(integrate_eom(&d, &p, &drive, 5.0 * NS), Err(Error::StepSize { .. })));
    }

    #[test]
    fn filtered_envelope_shape() {
        let env = Envelope::GaussianFilteredRect { sigma: 0.5 * NS };
        assert!(env.value(0.0, 450.0 * NS) < 1e-4);
        assert!((env.value(100.0 * NS, 450.0 * NS) - 1.0).abs() < 1e-12);
        assert!((env.value(2.0 * NS, 450.0 * NS) - 0.5).abs() < 1e-12);
        assert!(env.value(460.0 * NS, 450.0 * NS) < 1e-12);
    }

    #[test]
    fn decimation_keeps_endpoints() {
        let (p, d, drive) = setup(2);
        let traj = integrate_eom(&d, &p, &drive, DEFAULT_DT).unwrap();
        let small = traj.decimated(4096);
        assert!(small.len() <= 4096);
        assert_eq!(small.times[0], 0.0);
        assert_eq!(small.end_time(), traj.end_time());
    }
}
