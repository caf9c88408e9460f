//! Master-equation check of the linear model: a Kerr-oscillator transmon coupled to
//! the readout resonator, which hops to the damped Purcell filter.
//!
//! In the frame rotating at ω_d for both cavities and at ω̄_q for the qubit,
//!
//! ```text
//! H = Δ_r a†a + Δ_p f†f + 2χ a†a b†b + K_g a†²a² − 2λ′λ³E_c a†²a² b†b + (α/2) b†²b²
//!     + J(1 − 2λλ′ b†b)(a†f + f†a) − (𝓔(t) f† + 𝓔*(t) f)
//! dρ/dt = −i[H, ρ] + κ_p D[f]ρ (+ D[b]ρ / T1)
//! ```
//!
//! The drive sign makes `⟨f⟩` follow the semiclassical `β` of [`crate::dynamics`].

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{steady_state, DriveSpec, FieldTrajectory};
use crate::error::{Error, Result};
use crate::model::{DeviceParams, DispersiveDerived, QubitState};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

pub const TRACE_LIMIT: f64 = 1e-6;
pub const CONVERGENCE_LIMIT: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Dims {
    pub qubit: usize,
    pub resonator: usize,
    pub filter: usize,
}

impl Dims {
    pub fn new(qubit: usize, resonator: usize, filter: usize) -> Self {
        Dims { qubit, resonator, filter }
    }

    pub fn total(&self) -> usize {
        self.qubit * self.resonator * self.filter
    }

    fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.qubit) || self.resonator < 2 || self.filter < 2 {
            return Err(Error::Input(format!(
                "dims must be qubit ∈ {{2,3}}, resonator ≥ 2, filter ≥ 2 (got {self:?})"
            )));
        }
        Ok(())
    }

    /// `(q, n_a, n_f)` for a flat basis index.
    pub fn split(&self, idx: usize) -> (usize, usize, usize) {
        let per_q = self.resonator * self.filter;
        (idx / per_q, (idx % per_q) / self.filter, idx % self.filter)
    }

    pub fn index(&self, q: usize, na: usize, nf: usize) -> usize {
        (q * self.resonator + na) * self.filter + nf
    }

    pub fn grown(&self, by: usize) -> Dims {
        Dims::new(self.qubit, self.resonator + by, self.filter + by)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LindbladOptions {
    /// Adds `√(1/T1) b` as a collapse operator.
    pub t1_enabled: bool,
}

/// Coefficients of the effective Hamiltonian in the drive frame (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HamiltonianTerms {
    pub delta_r: f64,
    pub delta_p: f64,
    pub two_chi: f64,
    pub kerr_g: f64,
    pub cross_kerr: f64,
    pub alpha: f64,
    pub j: f64,
    pub j_shift: f64,
}

type Rows = Vec<Vec<(usize, Complex64)>>;

#[derive(Debug, Clone)]
pub struct LindbladModel {
    pub dims: Dims,
    pub terms: HamiltonianTerms,
    pub drive: DriveSpec,
    pub kappa_p: f64,
    /// Qubit decay rate (0 when T1 is off).
    pub gamma: f64,
    /// Drive-free Hamiltonian plus `−i/2 Σ L†L`.
    h_eff: Rows,
    h_diag: Vec<f64>,
    f_dag: Rows,
    f_op: Rows,
    /// `f|k⟩ = c|i⟩` stored at `i` as `(k, c)`.
    raise_f: Vec<Option<(usize, f64)>>,
    raise_b: Vec<Option<(usize, f64)>>,
}

pub fn build_effective_hamiltonian(
    derived: &DispersiveDerived,
    params: &DeviceParams,
    dims: Dims,
    drive: &DriveSpec,
    options: LindbladOptions,
) -> Result<LindbladModel> {
    dims.validate()?;
    drive.validate()?;
    check_truncation(derived, params, dims, drive)?;

    let terms = HamiltonianTerms {
        delta_r: derived.omega_r_g - drive.omega_d,
        delta_p: params.omega_p - drive.omega_d,
        two_chi: 2.0 * derived.chi,
        kerr_g: derived.kerr_g,
        cross_kerr: derived.kerr_e - derived.kerr_g,
        alpha: params.alpha,
        j: derived.j_eff_g,
        j_shift: derived.j_eff_g - derived.j_eff_e,
    };
    let gamma = if options.t1_enabled { 1.0 / params.t1 } else { 0.0 };
    let kappa = params.kappa_p;
    let d = dims.total();

    let mut h_diag = vec![0.0; d];
    let mut h_eff: Rows = vec![Vec::new(); d];
    let mut f_dag: Rows = vec![Vec::new(); d];
    let mut f_op: Rows = vec![Vec::new(); d];
    let mut raise_f = vec![None; d];
    let mut raise_b = vec![None; d];
    for i in 0..d {
        let (q, na, nf) = dims.split(i);
        let (qf, naf, nff) = (q as f64, na as f64, nf as f64);
        let diag = terms.delta_r * naf
            + terms.delta_p * nff
            + terms.two_chi * naf * qf
            + (terms.kerr_g + terms.cross_kerr * qf) * naf * (naf - 1.0)
            + 0.5 * terms.alpha * qf * (qf - 1.0);
        h_diag[i] = diag;
        h_eff[i].push((i, Complex64::new(diag, -0.5 * (kappa * nff + gamma * qf))));
        let jq = terms.j - terms.j_shift * qf;
        // a†f: |na, nf⟩ ← |na − 1, nf + 1⟩
        if na >= 1 && nf + 1 < dims.filter {
            let k = dims.index(q, na - 1, nf + 1);
            h_eff[i].push((k, Complex64::new(jq * (naf * (nff + 1.0)).sqrt(), 0.0)));
        }
        // f†a: |na, nf⟩ ← |na + 1, nf − 1⟩
        if nf >= 1 && na + 1 < dims.resonator {
            let k = dims.index(q, na + 1, nf - 1);
            h_eff[i].push((k, Complex64::new(jq * ((naf + 1.0) * nff).sqrt(), 0.0)));
        }
        if nf >= 1 {
            f_dag[i].push((i - 1, Complex64::new(nff.sqrt(), 0.0)));
        }
        if nf + 1 < dims.filter {
            f_op[i].push((i + 1, Complex64::new((nff + 1.0).sqrt(), 0.0)));
            raise_f[i] = Some((i + 1, (nff + 1.0).sqrt()));
        }
        if q + 1 < dims.qubit {
            raise_b[i] = Some((dims.index(q + 1, na, nf), (qf + 1.0).sqrt()));
        }
    }
    for row in &mut h_eff {
        row.sort_by_key(|e| e.0);
    }
    Ok(LindbladModel {
        dims,
        terms,
        drive: *drive,
        kappa_p: kappa,
        gamma,
        h_eff,
        h_diag,
        f_dag,
        f_op,
        raise_f,
        raise_b,
    })
}

/// Steady-state photon numbers must stay below a quarter of each truncation.
fn check_truncation(derived: &DispersiveDerived, params: &DeviceParams, dims: Dims, drive: &DriveSpec) -> Result<()> {
    let ss = steady_state(derived, params, drive);
    let na = ss.alpha_g.norm_sqr().max(ss.alpha_e.norm_sqr());
    let nf = ss.beta_g.norm_sqr().max(ss.beta_e.norm_sqr());
    for (mode, expected, levels) in [("resonator", na, dims.resonator), ("filter", nf, dims.filter)] {
        if 4.0 * expected > levels as f64 {
            return Err(Error::Truncation { mode, expected, levels });
        }
    }
    Ok(())
}

impl LindbladModel {
    fn drive_at(&self, t: f64) -> Complex64 {
        self.drive.complex_amplitude() * self.drive.envelope.value(t, self.drive.duration)
    }

    /// Dense Hermitian Hamiltonian at time `t`.
    pub fn hamiltonian(&self, t: f64) -> DMatrix<Complex64> {
        let d = self.dims.total();
        let e = self.drive_at(t);
        let mut h = DMatrix::from_element(d, d, ZERO);
        for i in 0..d {
            for &(k, v) in &self.h_eff[i] {
                h[(i, k)] += if k == i { Complex64::new(self.h_diag[i], 0.0) } else { v };
            }
            for &(k, v) in &self.f_dag[i] {
                h[(i, k)] -= e * v;
            }
            for &(k, v) in &self.f_op[i] {
                h[(i, k)] -= e.conj() * v;
            }
        }
        h
    }

    /// Self-Kerr `K_q` read off the diagonal: `(H_{q,2,0} − 2H_{q,1,0} + H_{q,0,0}) / 2`.
    pub fn kerr_coefficient(&self, q: usize) -> Option<f64> {
        if q >= self.dims.qubit || self.dims.resonator < 3 {
            return None;
        }
        let h = |na| self.h_diag[self.dims.index(q, na, 0)];
        Some(0.5 * (h(2) - 2.0 * h(1) + h(0)))
    }

    /// Bound on the Liouvillian norm used for the RK4 step check.
    pub fn norm_estimate(&self) -> f64 {
        let e = self.drive.amplitude.abs();
        let mut row_max: f64 = 0.0;
        for i in 0..self.dims.total() {
            let s: f64 = self.h_eff[i].iter().map(|(_, v)| v.norm()).sum::<f64>()
                + e * (self.f_dag[i].iter().chain(&self.f_op[i]).map(|(_, v)| v.norm()).sum::<f64>());
            row_max = row_max.max(s);
        }
        let nf = (self.dims.filter - 1) as f64;
        let nq = (self.dims.qubit - 1) as f64;
        2.0 * row_max + self.kappa_p * nf + self.gamma * nq
    }

    pub fn max_dt(&self) -> f64 {
        1.0 / self.norm_estimate()
    }

    fn liouvillian(&self, t: f64, rho: &[Complex64], y: &mut [Complex64], out: &mut [Complex64]) {
        let d = self.dims.total();
        let e = self.drive_at(t);
        y.par_chunks_mut(d).enumerate().for_each(|(i, row)| {
            row.fill(ZERO);
            let mut axpy = |c: Complex64, k: usize| {
                for (r, p) in row.iter_mut().zip(&rho[k * d..(k + 1) * d]) {
                    *r += c * p;
                }
            };
            for &(k, v) in &self.h_eff[i] {
                axpy(v, k);
            }
            if e != ZERO {
                for &(k, v) in &self.f_dag[i] {
                    axpy(-e * v, k);
                }
                for &(k, v) in &self.f_op[i] {
                    axpy(-e.conj() * v, k);
                }
            }
        });
        let y = &*y;
        out.par_chunks_mut(d).enumerate().for_each(|(i, row)| {
            for (j, o) in row.iter_mut().enumerate() {
                let mut v = -I * y[i * d + j] + I * y[j * d + i].conj();
                if let (Some((ki, ci)), Some((kj, cj))) = (self.raise_f[i], self.raise_f[j]) {
                    v += rho[ki * d + kj] * (self.kappa_p * ci * cj);
                }
                if self.gamma > 0.0 {
                    if let (Some((ki, ci)), Some((kj, cj))) = (self.raise_b[i], self.raise_b[j]) {
                        v += rho[ki * d + kj] * (self.gamma * ci * cj);
                    }
                }
                *o = v;
            }
        });
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct LindbladTrajectory {
    pub times: Vec<f64>,
    pub a: Vec<Complex64>,
    pub f: Vec<Complex64>,
    pub sigma_z: Vec<f64>,
    pub purity: Vec<f64>,
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    pub dt: f64,
    pub output_stride: usize,
    /// Diagonalize ρ at every output step to track its smallest eigenvalue.
    pub check_positivity: bool,
}

fn observe(dims: Dims, rho: &[Complex64]) -> (Complex64, Complex64, f64, f64, Complex64) {
    let d = dims.total();
    let (mut a, mut f, mut sz, mut purity, mut tr) = (ZERO, ZERO, 0.0, 0.0, ZERO);
    for k in 0..d {
        let (q, na, nf) = dims.split(k);
        let p = rho[k * d + k];
        tr += p;
        sz += (2.0 * q as f64 - 1.0) * p.re;
        if na >= 1 {
            a += rho[k * d + k - dims.filter] * (na as f64).sqrt();
        }
        if nf >= 1 {
            f += rho[k * d + k - 1] * (nf as f64).sqrt();
        }
    }
    for v in rho {
        purity += v.norm_sqr();
    }
    (a, f, sz, purity, tr)
}

fn hermiticity_error(d: usize, rho: &[Complex64]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in i..d {
            worst = worst.max((rho[i * d + j] - rho[j * d + i].conj()).norm());
        }
    }
    worst
}

fn min_eigenvalue(d: usize, rho: &[Complex64]) -> f64 {
    let m = DMatrix::from_fn(d, d, |i, j| 0.5 * (rho[i * d + j] + rho[j * d + i].conj()));
    m.symmetric_eigenvalues().min()
}

/// RK4 evolution from `|q⟩|0⟩|0⟩` over `[0, t_final]`.
pub fn evolve(model: &LindbladModel, initial: QubitState, t_final: f64, opts: EvolveOptions) -> Result<LindbladTrajectory> {
    let limit = model.max_dt();
    if !(opts.dt > 0.0) || opts.dt >= limit {
        return Err(Error::StepSize { dt: opts.dt, limit });
    }
    if !(t_final >= 0.0) || opts.output_stride == 0 {
        return Err(Error::Input("evolve needs t_final ≥ 0 and output_stride ≥ 1".into()));
    }
    let dims = model.dims;
    let d = dims.total();
    let q0 = match initial {
        QubitState::Ground => 0,
        QubitState::Excited => 1,
    };
    let mut rho = vec![ZERO; d * d];
    let i0 = dims.index(q0, 0, 0);
    rho[i0 * d + i0] = Complex64::new(1.0, 0.0);

    let steps = (t_final / opts.dt).round() as usize;
    let dt = opts.dt;
    let mut traj = LindbladTrajectory {
        min_eigenvalue: f64::INFINITY,
        ..Default::default()
    };
    let record = |k: usize, rho: &[Complex64], traj: &mut LindbladTrajectory| -> Result<()> {
        let (a, f, sz, purity, tr) = observe(dims, rho);
        let trace_error = (tr - 1.0).norm();
        if trace_error > TRACE_LIMIT {
            return Err(Error::TraceDrift { trace: tr.re });
        }
        traj.times.push(k as f64 * dt);
        traj.a.push(a);
        traj.f.push(f);
        traj.sigma_z.push(sz);
        traj.purity.push(purity);
        traj.max_trace_error = traj.max_trace_error.max(trace_error);
        traj.max_hermiticity_error = traj.max_hermiticity_error.max(hermiticity_error(d, rho));
        if opts.check_positivity {
            traj.min_eigenvalue = traj.min_eigenvalue.min(min_eigenvalue(d, rho));
        }
        Ok(())
    };
    record(0, &rho, &mut traj)?;

    let mut y = vec![ZERO; d * d];
    let mut k1 = vec![ZERO; d * d];
    let mut k2 = vec![ZERO; d * d];
    let mut k3 = vec![ZERO; d * d];
    let mut k4 = vec![ZERO; d * d];
    let mut tmp = vec![ZERO; d * d];
    let combine = |tmp: &mut [Complex64], rho: &[Complex64], k: &[Complex64], h: f64| {
        tmp.par_iter_mut()
            .zip(rho.par_iter().zip(k.par_iter()))
            .for_each(|(t, (r, k))| *t = r + k * h);
    };
    for step in 0..steps {
        let t = step as f64 * dt;
        model.liouvillian(t, &rho, &mut y, &mut k1);
        combine(&mut tmp, &rho, &k1, dt / 2.0);
        model.liouvillian(t + dt / 2.0, &tmp, &mut y, &mut k2);
        combine(&mut tmp, &rho, &k2, dt / 2.0);
        model.liouvillian(t + dt / 2.0, &tmp, &mut y, &mut k3);
        combine(&mut tmp, &rho, &k3, dt);
        model.liouvillian(t + dt, &tmp, &mut y, &mut k4);
        rho.par_iter_mut().enumerate().for_each(|(i, r)| {
            *r += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (dt / 6.0);
        });
        if (step + 1) % opts.output_stride == 0 || step + 1 == steps {
            record(step + 1, &rho, &mut traj)?;
        }
    }
    Ok(traj)
}

/// `max_t |⟨f⟩(t) − β(t)| / max_t |β(t)|`, with β linearly interpolated onto the
/// master-equation output times.
pub fn semiclassical_deviation(traj: &LindbladTrajectory, fields: &FieldTrajectory, state: QubitState) -> Result<f64> {
    let beta = fields.beta(state);
    if fields.is_empty() || traj.times.last().copied().unwrap_or(0.0) > fields.end_time() * (1.0 + 1e-12) {
        return Err(Error::Span {
            available: fields.end_time(),
            requested: traj.times.last().copied().unwrap_or(0.0),
        });
    }
    let dt = if fields.len() > 1 { fields.times[1] - fields.times[0] } else { 1.0 };
    let at = |t: f64| {
        let x = t / dt;
        let k = (x.floor() as usize).min(fields.len() - 1);
        if k + 1 >= fields.len() {
            return beta[k];
        }
        let w = x - k as f64;
        beta[k] * (1.0 - w) + beta[k + 1] * w
    };
    let scale = beta.iter().map(|b| b.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        let worst = traj.f.iter().map(|f| f.norm()).fold(0.0, f64::max);
        return Ok(if worst == 0.0 { 0.0 } else { f64::INFINITY });
    }
    let worst = traj
        .times
        .iter()
        .zip(&traj.f)
        .map(|(&t, f)| (f - at(t)).norm())
        .fold(0.0, f64::max);
    Ok(worst / scale)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConvergenceReport {
    pub base: Dims,
    pub grown: Dims,
    pub f_end_base: Complex64,
    pub f_end_grown: Complex64,
    pub relative_change: f64,
    pub passed: bool,
}

/// Re-runs with two extra Fock levels in each cavity and compares the final `⟨f⟩`.
pub fn convergence_gate(
    derived: &DispersiveDerived,
    params: &DeviceParams,
    dims: Dims,
    drive: &DriveSpec,
    options: LindbladOptions,
    initial: QubitState,
    t_final: f64,
    dt: f64,
) -> Result<ConvergenceReport> {
    let grown = dims.grown(2);
    let run = |dims: Dims| -> Result<Complex64> {
        let model = build_effective_hamiltonian(derived, params, dims, drive, options)?;
        let steps = (t_final / dt).round().max(1.0) as usize;
        let tr = evolve(
            &model,
            initial,
            t_final,
            EvolveOptions {
                dt,
                output_stride: steps,
                check_positivity: false,
            },
        )?;
        Ok(*tr.f.last().unwrap())
    };
    let (base_end, grown_end) = (run(dims)?, run(grown)?);
    let scale = grown_end.norm().max(f64::MIN_POSITIVE);
    let relative_change = (base_end - grown_end).norm() / scale;
    Ok(ConvergenceReport {
        base: dims,
        grown,
        f_end_base: base_end,
        f_end_grown: grown_end,
        relative_change,
        passed: relative_change < CONVERGENCE_LIMIT,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::drive_amplitude_from_photons;
    use crate::dynamics::integrate_eom;
    use crate::model::derive_dispersive;
    use crate::presets::TABLE_ONE;
    use crate::units::{mhz, NS, US};

    fn point(i: usize) -> (DeviceParams, DispersiveDerived, f64) {
        let p = TABLE_ONE[i].device();
        let d = derive_dispersive(&p, None).unwrap();
        (p, d, mhz(TABLE_ONE[i].omega_d_mhz))
    }

    fn dense_eigenvalues(h: &DMatrix<Complex64>) -> Vec<f64> {
        let mut v: Vec<f64> = h.clone().symmetric_eigenvalues().iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn decoupled_hamiltonian_is_number_diagonal() {
        let (p, mut d, w) = point(4);
        d.chi = 0.0;
        d.kerr_g = 0.0;
        d.kerr_e = 0.0;
        d.j_eff_g = 0.0;
        d.j_eff_e = 0.0;
        let mut p = p;
        p.alpha = 0.0;
        let drive = DriveSpec::constant(w, 0.0, 100.0 * NS);
        let dims = Dims::new(2, 4, 3);
        let m = build_effective_hamiltonian(&d, &p, dims, &drive, LindbladOptions::default()).unwrap();
        let h = m.hamiltonian(0.0);
        for i in 0..dims.total() {
            let (_, na, nf) = dims.split(i);
            for j in 0..dims.total() {
                if i != j {
                    assert_eq!(h[(i, j)], ZERO);
                }
            }
            let expected = na as f64 * (d.omega_r_g - w) + nf as f64 * (p.omega_p - w);
            assert!((h[(i, i)].re - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn kerr_ratio_read_from_matrix() {
        let (p, d, w) = point(0);
        let drive = DriveSpec::constant(w, 0.0, 100.0 * NS);
        let m = build_effective_hamiltonian(&d, &p, Dims::new(2, 4, 3), &drive, LindbladOptions::default()).unwrap();
        let (kg, ke) = (m.kerr_coefficient(0).unwrap(), m.kerr_coefficient(1).unwrap());
        assert!(((kg - d.kerr_g) / d.kerr_g).abs() < 1e-6);
        let expected = 1.0 + 4.0 * d.lambda_prime / d.lambda;
        assert!((ke / kg - expected).abs() < 1e-10, "{} vs {}", ke / kg, expected);
    }

    #[test]
    fn weak_hop_matches_second_order_shift() {
        let (p, mut d, w) = point(2);
        d.j_eff_g = mhz(0.5);
        d.j_eff_e = mhz(0.5);
        let drive = DriveSpec::constant(w, 0.0, 100.0 * NS);
        let dims = Dims::new(2, 2, 2);
        let m = build_effective_hamiltonian(&d, &p, dims, &drive, LindbladOptions::default()).unwrap();
        let eig = dense_eigenvalues(&m.hamiltonian(0.0));
        let t = m.terms;
        let (dr, dp) = (t.delta_r, t.delta_p);
        let j = d.j_eff_g;
        for (delta_a, delta_f) in [(dr, dp), (dr + t.two_chi, dp)] {
            let shift = j * j / (delta_a - delta_f);
            for target in [delta_a + shift, delta_f - shift] {
                let nearest = eig.iter().map(|e| (e - target).abs()).fold(f64::INFINITY, f64::min);
                assert!(nearest < 10.0 * j.powi(4) / (delta_a - delta_f).abs().powi(3), "{nearest}");
            }
        }
    }

    #[test]
    fn truncation_is_enforced() {
        let (p, d, w) = point(4);
        let amp = drive_amplitude_from_photons(2.0, &d, &p, w).unwrap();
        let drive = DriveSpec::constant(w, amp, 100.0 * NS);
        let r = build_effective_hamiltonian(&d, &p, Dims::new(2, 6, 6), &drive, LindbladOptions::default());
        assert!(matches!(r, Err(Error::Truncation { .. })));
        assert!(build_effective_hamiltonian(&d, &p, Dims::new(1, 6, 6), &drive, LindbladOptions::default()).is_err());
    }

    #[test]
    fn undriven_state_is_stationary() {
        let (p, d, w) = point(4);
        let drive = DriveSpec::constant(w, 0.0, 50.0 * NS);
        let m = build_effective_hamiltonian(&d, &p, Dims::new(2, 3, 3), &drive, LindbladOptions::default()).unwrap();
        for state in QubitState::BOTH {
            let tr = evolve(
                &m,
                state,
                50.0 * NS,
                EvolveOptions {
                    dt: 0.5 * m.max_dt(),
                    output_stride: 50,
                    check_positivity: true,
                },
            )
            .unwrap();
            assert!(tr.f.iter().chain(&tr.a).all(|v| *v == ZERO));
            assert!(tr.sigma_z.iter().all(|s| *s == state.sigma_z()));
            assert!(tr.purity.iter().all(|p| (p - 1.0).abs() < 1e-14));
        }
    }

    #[test]
    fn oversized_step_is_rejected() {
        let (p, d, w) = point(4);
        let drive = DriveSpec::constant(w, 0.0, 50.0 * NS);
        let m = build_effective_hamiltonian(&d, &p, Dims::new(2, 3, 3), &drive, LindbladOptions::default()).unwrap();
        let opts = EvolveOptions {
            dt: 2.0 * m.max_dt(),
            output_stride: 1,
            check_positivity: false,
        };
        assert!(matches!(evolve(&m, QubitState::Ground, 10.0 * NS, opts), Err(Error::StepSize { .. })));
    }

    #[test]
    fn qubit_decay_rate() {
        let (mut p, d, w) = point(4);
        p.t1 = 0.2 * US;
        let drive = DriveSpec::constant(w, 0.0, 400.0 * NS);
        let m = build_effective_hamiltonian(&d, &p, Dims::new(2, 2, 2), &drive, LindbladOptions { t1_enabled: true }).unwrap();
        let tr = evolve(
            &m,
            QubitState::Excited,
            400.0 * NS,
            EvolveOptions {
                dt: 0.5 * m.max_dt(),
                output_stride: 20,
                check_positivity: false,
            },
        )
        .unwrap();
        // least-squares slope of ln(⟨σ_z⟩ + 1)
        let pts: Vec<(f64, f64)> = tr.times.iter().zip(&tr.sigma_z).map(|(t, s)| (*t, (s + 1.0).ln())).collect();
        let n = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let slope = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mt).powi(2)).sum::<f64>();
        assert!(((-slope * p.t1) - 1.0).abs() < 0.02, "rate·T1 = {}", -slope * p.t1);
        assert!(tr.max_trace_error < 1e-8);
    }

    #[test]
    fn weak_drive_follows_semiclassical_fields() {
        let (p, d, w) = point(4);
        let amp = drive_amplitude_from_photons(0.1, &d, &p, w).unwrap();
        let drive = DriveSpec::constant(w, amp, 60.0 * NS);
        let dims = Dims::new(2, 4, 4);
        let m = build_effective_hamiltonian(&d, &p, dims, &drive, LindbladOptions::default()).unwrap();
        let dt = 0.002 * NS;
        assert!(dt < m.max_dt());
        let stride = 50;
        let fields = integrate_eom(&d, &p, &drive, dt).unwrap();
        for state in QubitState::BOTH {
            let tr = evolve(
                &m,
                state,
                drive.duration,
                EvolveOptions {
                    dt,
                    output_stride: stride,
                    check_positivity: true,
                },
            )
            .unwrap();
            let dev = semiclassical_deviation(&tr, &fields, state).unwrap();
            assert!(dev < 0.05, "{state:?}: {dev}");
            assert!(tr.max_trace_error < 1e-8 && tr.max_hermiticity_error < 1e-8);
            assert!(tr.min_eigenvalue > -1e-8);
        }
    }
}
