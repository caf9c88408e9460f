//! Single-shot readout: mode-matched integration, Monte-Carlo IQ records with
//! optional qubit decay, two-component Gaussian-mixture fitting and the resulting
//! SNR and assignment error.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::FieldTrajectory;
use crate::error::{Error, Result};
use crate::model::{DeviceParams, QubitState};

const CHUNK: usize = 1024;
const EM_MAX_ITER: usize = 500;
const EM_TOL_PER_SHOT: f64 = 1e-9;
const MIN_WEIGHT: f64 = 1e-3;

/// Number of trajectory samples spanning `[0, tau]`.
fn window(trajectory: &FieldTrajectory, tau: f64) -> Result<(usize, f64)> {
    if trajectory.len() < 2 || !(tau > 0.0) {
        return Err(Error::Span {
            available: trajectory.end_time(),
            requested: tau,
        });
    }
    let dt = trajectory.times[1] - trajectory.times[0];
    let n = (tau / dt).round() as usize;
    if n == 0 || n >= trajectory.len() {
        return Err(Error::Span {
            available: trajectory.end_time(),
            requested: tau,
        });
    }
    Ok((n + 1, dt))
}

fn trapezoid(values: impl ExactSizeIterator<Item = Complex64>, dt: f64) -> Complex64 {
    let n = values.len();
    values
        .enumerate()
        .map(|(k, v)| if k == 0 || k + 1 == n { v * 0.5 } else { v })
        .sum::<Complex64>()
        * dt
}

/// Weights `w(t) ∝ β_e(t) − β_g(t)` on the trajectory grid over `[0, tau]`,
/// normalized so that `∫|w|² dt = 1`.
pub fn matched_weights(trajectory: &FieldTrajectory, tau: f64) -> Result<Vec<Complex64>> {
    let (n, dt) = window(trajectory, tau)?;
    let diff: Vec<Complex64> = (0..n).map(|k| trajectory.beta_e[k] - trajectory.beta_g[k]).collect();
    let norm = trapezoid(diff.iter().map(|d| Complex64::new(d.norm_sqr(), 0.0)), dt).re;
    if !(norm > 0.0) {
        return Err(Error::ZeroSeparation);
    }
    let s = norm.sqrt();
    Ok(diff.into_iter().map(|d| d / s).collect())
}

/// Output SNR `2ηκ_p |∫w*(β_e − β_g)|² / ∫|w|²` of an arbitrary weight function.
pub fn weighted_snr(trajectory: &FieldTrajectory, params: &DeviceParams, tau: f64, weights: &[Complex64]) -> Result<f64> {
    let (n, dt) = window(trajectory, tau)?;
    if weights.len() != n {
        return Err(Error::Input(format!("expected {n} weight samples, got {}", weights.len())));
    }
    let signal = trapezoid((0..n).map(|k| weights[k].conj() * (trajectory.beta_e[k] - trajectory.beta_g[k])), dt);
    let power = trapezoid(weights.iter().map(|w| Complex64::new(w.norm_sqr(), 0.0)), dt).re;
    if !(power > 0.0) {
        return Err(Error::Input("weights are identically zero".into()));
    }
    Ok(2.0 * params.eta * params.kappa_p * signal.norm_sqr() / power)
}

/// Noiseless integrated pointer positions and the per-quadrature noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointerModel {
    pub mu_g: Complex64,
    pub mu_e: Complex64,
    /// Standard deviation per quadrature.
    pub sigma: f64,
    pub tau: f64,
    pub t1: f64,
}

impl PointerModel {
    /// Integrates the filter fields with matched weights; the noise is set so the
    /// ensemble SNR equals the integrated SNR of the trajectory.
    pub fn from_trajectory(trajectory: &FieldTrajectory, params: &DeviceParams, tau: f64) -> Result<Self> {
        let w = matched_weights(trajectory, tau)?;
        let (n, dt) = window(trajectory, tau)?;
        let mu = |beta: &[Complex64]| trapezoid((0..n).map(|k| w[k].conj() * beta[k]), dt);
        let (mu_g, mu_e) = (mu(&trajectory.beta_g), mu(&trajectory.beta_e));
        let snr = weighted_snr(trajectory, params, tau, &w)?;
        if !(snr > 0.0) {
            return Err(Error::ZeroSeparation);
        }
        Ok(PointerModel {
            mu_g,
            mu_e,
            sigma: (mu_e - mu_g).norm() / snr.sqrt(),
            tau,
            t1: params.t1,
        })
    }

    /// Pointers on the I axis, separated by `√snr` in units of the noise.
    pub fn from_snr(snr: f64, tau: f64, t1: f64) -> Self {
        PointerModel {
            mu_g: Complex64::new(0.0, 0.0),
            mu_e: Complex64::new(snr.max(0.0).sqrt(), 0.0),
            sigma: 1.0,
            tau,
            t1,
        }
    }

    pub fn snr(&self) -> f64 {
        (self.mu_e - self.mu_g).norm_sqr() / (self.sigma * self.sigma)
    }

    pub fn mean(&self, state: QubitState) -> Complex64 {
        match state {
            QubitState::Ground => self.mu_g,
            QubitState::Excited => self.mu_e,
        }
    }
}

/// Signal reported when the qubit decays at `t_d < τ` during integration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayModel {
    /// The record lands on the ground-state pointer.
    #[default]
    Projective,
    /// `(t_d/τ) μ_e + (1 − t_d/τ) μ_g`.
    Interpolated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotOptions {
    pub t1_enabled: bool,
    pub decay_model: DecayModel,
    /// Multiplies the ground-state noise, standing in for Kerr broadening.
    pub broadening: Option<f64>,
}

impl Default for ShotOptions {
    fn default() -> Self {
        ShotOptions {
            t1_enabled: true,
            decay_model: DecayModel::Projective,
            broadening: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub i: f64,
    pub q: f64,
    pub prepared: QubitState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotSet {
    pub records: Vec<ShotRecord>,
    pub n_shots_per_state: usize,
    pub tau: f64,
    pub seed: u64,
}

impl ShotSet {
    pub fn validate(&self) -> Result<()> {
        if self.records.iter().any(|r| !r.i.is_finite() || !r.q.is_finite()) {
            return Err(Error::Input("shot records must be finite".into()));
        }
        for s in QubitState::BOTH {
            if !self.records.iter().any(|r| r.prepared == s) {
                return Err(Error::Input(format!("no shots prepared in {}", s.label())));
            }
        }
        Ok(())
    }

    pub fn count(&self, state: QubitState) -> usize {
        self.records.iter().filter(|r| r.prepared == state).count()
    }
}

/// `n_shots` records per preparation (g first, then e). Chunks of shots draw from
/// independent ChaCha streams of `seed`, so the output does not depend on the
/// thread count.
pub fn sample_shots(pointer: &PointerModel, n_shots: usize, seed: u64, options: ShotOptions) -> Result<ShotSet> {
    if n_shots == 0 {
        return Err(Error::Input("n_shots must be ≥ 1".into()));
    }
    if !(pointer.sigma > 0.0) || !(pointer.tau > 0.0) || !(pointer.t1 > 0.0) {
        return Err(Error::Input("pointer model needs sigma, tau and T1 > 0".into()));
    }
    let broadening = options.broadening.unwrap_or(1.0);
    if !(broadening > 0.0) {
        return Err(Error::Input(format!("broadening factor must be > 0 (got {broadening})")));
    }
    let decay = Exp::new(1.0 / pointer.t1).map_err(|e| Error::Input(e.to_string()))?;
    let total = 2 * n_shots;
    let chunks: Vec<Vec<ShotRecord>> = (0..total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            (c * CHUNK..((c + 1) * CHUNK).min(total))
                .map(|k| {
                    let prepared = if k < n_shots { QubitState::Ground } else { QubitState::Excited };
                    let mut centre = pointer.mean(prepared);
                    let mut sigma = pointer.sigma;
                    let t_d: f64 = decay.sample(&mut rng);
                    match prepared {
                        QubitState::Ground => sigma *= broadening,
                        QubitState::Excited if options.t1_enabled && t_d < pointer.tau => {
                            centre = match options.decay_model {
                                DecayModel::Projective => pointer.mu_g,
                                DecayModel::Interpolated => {
                                    let x = t_d / pointer.tau;
                                    pointer.mu_e * x + pointer.mu_g * (1.0 - x)
                                }
                            };
                        }
                        QubitState::Excited => {}
                    }
                    let (ni, nq): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
                    ShotRecord {
                        i: centre.re + sigma * ni,
                        q: centre.im + sigma * nq,
                        prepared,
                    }
                })
                .collect()
        })
        .collect();
    Ok(ShotSet {
        records: chunks.into_iter().flatten().collect(),
        n_shots_per_state: n_shots,
        tau: pointer.tau,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Component {
    pub mean: [f64; 2],
    pub covariance: [[f64; 2]; 2],
    pub weight: f64,
}

impl Component {
    fn mean_v(&self) -> Vector2<f64> {
        Vector2::new(self.mean[0], self.mean[1])
    }

    fn cov_m(&self) -> Matrix2<f64> {
        Matrix2::new(self.covariance[0][0], self.covariance[0][1], self.covariance[1][0], self.covariance[1][1])
    }

    /// `sqrt` of the covariance diagonal.
    pub fn radii(&self) -> [f64; 2] {
        [self.covariance[0][0].sqrt(), self.covariance[1][1].sqrt()]
    }

    pub fn log_density(&self, x: &Vector2<f64>) -> f64 {
        let c = self.cov_m();
        let det = c.determinant();
        let inv = c.try_inverse().unwrap_or_else(Matrix2::identity);
        let d = x - self.mean_v();
        -0.5 * (d.dot(&(inv * d))) - 0.5 * det.ln() - std::f64::consts::LN_2 - std::f64::consts::PI.ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixtureFit {
    pub g: Component,
    pub e: Component,
    pub iterations: usize,
    pub log_likelihood: f64,
    /// The data did not support two components (BIC) and both carry the
    /// single-Gaussian fit.
    pub merged: bool,
}

impl MixtureFit {
    /// Maximum-likelihood assignment (mixture weights not applied).
    pub fn assign(&self, i: f64, q: f64) -> QubitState {
        let x = Vector2::new(i, q);
        if self.e.log_density(&x) > self.g.log_density(&x) {
            QubitState::Excited
        } else {
            QubitState::Ground
        }
    }
}

fn moments(points: &[Vector2<f64>], resp: &[f64]) -> (f64, Vector2<f64>, Matrix2<f64>) {
    let w: f64 = resp.iter().sum();
    let mean = points.iter().zip(resp).map(|(p, r)| p * *r).sum::<Vector2<f64>>() / w.max(f64::MIN_POSITIVE);
    let mut cov = Matrix2::zeros();
    for (p, r) in points.iter().zip(resp) {
        let d = p - mean;
        cov += d * d.transpose() * *r;
    }
    (w, mean, cov / w.max(f64::MIN_POSITIVE))
}

fn component(weight: f64, mean: Vector2<f64>, cov: Matrix2<f64>, floor: f64) -> Component {
    let c = cov + Matrix2::identity() * floor;
    Component {
        mean: [mean[0], mean[1]],
        covariance: [[c[(0, 0)], c[(0, 1)]], [c[(1, 0)], c[(1, 1)]]],
        weight,
    }
}

/// Two-component EM on the IQ plane. Labels are used only afterwards, to name the
/// component closer to the ground-state records `g`. When BIC prefers a single
/// Gaussian the components are merged.
pub fn fit_mixture(shots: &ShotSet) -> Result<MixtureFit> {
    shots.validate()?;
    for s in QubitState::BOTH {
        if shots.count(s) < 100 {
            return Err(Error::Input(format!("need ≥ 100 shots prepared in {} (got {})", s.label(), shots.count(s))));
        }
    }
    let pts: Vec<Vector2<f64>> = shots.records.iter().map(|r| Vector2::new(r.i, r.q)).collect();
    let n = pts.len();
    let ones = vec![1.0; n];
    let (_, mean_all, cov_all) = moments(&pts, &ones);
    let floor = 1e-12 * cov_all.trace().max(f64::MIN_POSITIVE);

    // split along the principal axis with a few 1-D two-means passes
    let eig = cov_all.symmetric_eigen();
    let axis = if eig.eigenvalues[0] >= eig.eigenvalues[1] { eig.eigenvectors.column(0) } else { eig.eigenvectors.column(1) }.into_owned();
    let proj: Vec<f64> = pts.iter().map(|p| (p - mean_all).dot(&axis)).collect();
    let mut sorted = proj.clone();
    sorted.sort_by(f64::total_cmp);
    let (mut c0, mut c1) = (sorted[n / 10], sorted[9 * n / 10]);
    for _ in 0..20 {
        let (mut s0, mut n0, mut s1, mut n1) = (0.0, 0usize, 0.0, 0usize);
        for &x in &proj {
            if (x - c0).abs() <= (x - c1).abs() {
                s0 += x;
                n0 += 1;
            } else {
                s1 += x;
                n1 += 1;
            }
        }
        if n0 == 0 || n1 == 0 {
            break;
        }
        (c0, c1) = (s0 / n0 as f64, s1 / n1 as f64);
    }
    let mut resp: Vec<f64> = proj.iter().map(|&x| if (x - c0).abs() <= (x - c1).abs() { 1.0 } else { 0.0 }).collect();
    if resp.iter().all(|&r| r == 1.0) || resp.iter().all(|&r| r == 0.0) {
        resp.iter_mut().enumerate().for_each(|(k, r)| *r = (k % 2) as f64);
    }

    let build = |resp: &[f64]| -> [Component; 2] {
        let inv: Vec<f64> = resp.iter().map(|r| 1.0 - r).collect();
        let (w0, m0, s0) = moments(&pts, resp);
        let (w1, m1, s1) = moments(&pts, &inv);
        [component(w0 / n as f64, m0, s0, floor), component(w1 / n as f64, m1, s1, floor)]
    };
    let mut comps = build(&resp);
    let mut last_ll = f64::NEG_INFINITY;
    let mut iterations = 0;
    for it in 1..=EM_MAX_ITER {
        iterations = it;
        for c in &comps {
            if c.weight < MIN_WEIGHT {
                return Err(Error::DegenerateComponent { weight: c.weight });
            }
        }
        let (lw0, lw1) = (comps[0].weight.ln(), comps[1].weight.ln());
        let (ll, r): (f64, Vec<f64>) = {
            let parts: Vec<(f64, f64)> = pts
                .par_iter()
                .map(|p| {
                    let a = lw0 + comps[0].log_density(p);
                    let b = lw1 + comps[1].log_density(p);
                    let m = a.max(b);
                    let lse = m + ((a - m).exp() + (b - m).exp()).ln();
                    (lse, (a - lse).exp())
                })
                .collect();
            (parts.iter().map(|p| p.0).sum(), parts.into_iter().map(|p| p.1).collect())
        };
        resp = r;
        comps = build(&resp);
        if (ll - last_ll).abs() < EM_TOL_PER_SHOT * n as f64 {
            last_ll = ll;
            break;
        }
        last_ll = ll;
    }
    for c in &comps {
        if c.weight < MIN_WEIGHT {
            return Err(Error::DegenerateComponent { weight: c.weight });
        }
    }

    // BIC: two full-covariance components add 6 parameters over a single Gaussian
    let single = component(1.0, mean_all, cov_all, floor);
    let ll_single: f64 = pts.par_iter().map(|p| single.log_density(p)).sum();
    if last_ll - ll_single <= 3.0 * (n as f64).ln() {
        let half = Component { weight: 0.5, ..single };
        return Ok(MixtureFit {
            g: half,
            e: half,
            iterations,
            log_likelihood: ll_single,
            merged: true,
        });
    }

    let g_pts: Vec<f64> = shots.records.iter().map(|r| if r.prepared == QubitState::Ground { 1.0 } else { 0.0 }).collect();
    let (_, g_centre, _) = moments(&pts, &g_pts);
    let d0 = (comps[0].mean_v() - g_centre).norm();
    let d1 = (comps[1].mean_v() - g_centre).norm();
    let (g, e) = if d0 <= d1 { (comps[0], comps[1]) } else { (comps[1], comps[0]) };
    Ok(MixtureFit {
        g,
        e,
        iterations,
        log_likelihood: last_ll,
        merged: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShotMetrics {
    pub snr: f64,
    pub epsilon_a: f64,
    pub p_e_given_g: f64,
    pub p_g_given_e: f64,
    pub mu_g: [f64; 2],
    pub mu_e: [f64; 2],
    /// Standard deviation of each component along the μ_g–μ_e axis.
    pub sigma_g: f64,
    pub sigma_e: f64,
    /// `sqrt` of each component's covariance diagonal.
    pub radii_g: [f64; 2],
    pub radii_e: [f64; 2],
    pub n_g: usize,
    pub n_e: usize,
}

impl ShotMetrics {
    /// Binomial standard error of `ε_a`.
    pub fn epsilon_a_std_error(&self) -> f64 {
        let v = |p: f64, n: usize| p * (1.0 - p) / n.max(1) as f64;
        0.5 * (v(self.p_e_given_g, self.n_g) + v(self.p_g_given_e, self.n_e)).sqrt()
    }
}

pub fn extract_metrics(fit: &MixtureFit, shots: &ShotSet) -> ShotMetrics {
    let sep = fit.e.mean_v() - fit.g.mean_v();
    let dist = sep.norm();
    let (sigma_g, sigma_e) = if dist > 0.0 {
        let u = sep / dist;
        ((u.dot(&(fit.g.cov_m() * u))).sqrt(), (u.dot(&(fit.e.cov_m() * u))).sqrt())
    } else {
        let s = |c: &Component| (0.5 * c.cov_m().trace()).sqrt();
        (s(&fit.g), s(&fit.e))
    };
    let snr = if dist > 0.0 { (dist / (0.5 * (sigma_g + sigma_e))).powi(2) } else { 0.0 };

    let (mut eg, mut ng, mut ge, mut ne) = (0usize, 0usize, 0usize, 0usize);
    for r in &shots.records {
        let got = fit.assign(r.i, r.q);
        match r.prepared {
            QubitState::Ground => {
                ng += 1;
                eg += (got == QubitState::Excited) as usize;
            }
            QubitState::Excited => {
                ne += 1;
                ge += (got == QubitState::Ground) as usize;
            }
        }
    }
    let frac = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let (p_eg, p_ge) = (frac(eg, ng), frac(ge, ne));
    ShotMetrics {
        snr,
        epsilon_a: 0.5 * (p_eg + p_ge),
        p_e_given_g: p_eg,
        p_g_given_e: p_ge,
        mu_g: fit.g.mean,
        mu_e: fit.e.mean,
        sigma_g,
        sigma_e,
        radii_g: fit.g.radii(),
        radii_e: fit.e.radii(),
        n_g: ng,
        n_e: ne,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate_eom, DriveSpec, DEFAULT_DT};
    use crate::model::derive_dispersive;
    use crate::presets::TABLE_ONE;
    use crate::snr::snr_integral;
    use crate::units::{mhz, NS, US};
    use statrs::function::erf::erfc;

    fn flat(sep: Complex64, n: usize, dt: f64) -> FieldTrajectory {
        FieldTrajectory {
            times: (0..n).map(|k| k as f64 * dt).collect(),
            alpha_g: vec![Complex64::default(); n],
            alpha_e: vec![Complex64::default(); n],
            beta_g: vec![Complex64::default(); n],
            beta_e: vec![sep; n],
        }
    }

    fn no_decay() -> ShotOptions {
        ShotOptions {
            t1_enabled: false,
            ..Default::default()
        }
    }

    #[test]
    fn constant_separation_gives_flat_weights() {
        let tr = flat(Complex64::new(0.3, -0.4), 201, 1.0 * NS);
        let tau = 200.0 * NS;
        let w = matched_weights(&tr, tau).unwrap();
        let expected = 1.0 / tau.sqrt();
        for v in &w {
            assert!((v.norm() - expected).abs() < 1e-10 * expected);
        }
    }

    #[test]
    fn weights_are_normalized_and_reject_zero_separation() {
        let p = TABLE_ONE[1].device();
        let d = derive_dispersive(&p, None).unwrap();
        let drive = DriveSpec::readout_pulse(mhz(TABLE_ONE[1].omega_d_mhz), mhz(3.0), 100.0 * NS);
        let tr = integrate_eom(&d, &p, &drive, DEFAULT_DT).unwrap();
        let w = matched_weights(&tr, 100.0 * NS).unwrap();
        let norm = trapezoid(w.iter().map(|v| Complex64::new(v.norm_sqr(), 0.0)), DEFAULT_DT).re;
        assert!((norm - 1.0).abs() < 1e-10);
        let same = flat(Complex64::default(), 50, 1.0 * NS);
        assert!(matches!(matched_weights(&same, 20.0 * NS), Err(Error::ZeroSeparation)));
        assert!(matches!(matched_weights(&same, 80.0 * NS), Err(Error::Span { .. })));
    }

    #[test]
    fn matched_pointer_reproduces_integrated_snr() {
        let p = TABLE_ONE[4].device();
        let d = derive_dispersive(&p, None).unwrap();
        let drive = DriveSpec::readout_pulse(mhz(TABLE_ONE[4].omega_d_mhz), mhz(3.0), 100.0 * NS);
        let tr = integrate_eom(&d, &p, &drive, DEFAULT_DT).unwrap();
        let pm = PointerModel::from_trajectory(&tr, &p, 100.0 * NS).unwrap();
        let direct = snr_integral(&tr, &p, 100.0 * NS).unwrap();
        assert!((pm.snr() - direct).abs() < 1e-9 * direct);
    }

    #[test]
    fn sampling_is_deterministic() {
        let pm = PointerModel::from_snr(10.0, 100.0 * NS, 30.4 * US);
        let a = sample_shots(&pm, 3000, 7, ShotOptions::default()).unwrap();
        let b = sample_shots(&pm, 3000, 7, ShotOptions::default()).unwrap();
        let c = sample_shots(&pm, 3000, 8, ShotOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.count(QubitState::Ground), 3000);
        assert!(sample_shots(&pm, 0, 7, ShotOptions::default()).is_err());
    }

    #[test]
    fn separated_means_are_recovered() {
        let pm = PointerModel::from_snr(100.0, 100.0 * NS, 30.4 * US);
        let shots = sample_shots(&pm, 5000, 3, no_decay()).unwrap();
        let fit = fit_mixture(&shots).unwrap();
        assert!((fit.g.mean[0] - 0.0).abs() < 0.05 && fit.g.mean[1].abs() < 0.05);
        assert!((fit.e.mean[0] - 10.0).abs() < 0.05 && fit.e.mean[1].abs() < 0.05);
        assert!((fit.g.weight + fit.e.weight - 1.0).abs() < 1e-12);
        assert!(!fit.merged);
    }

    #[test]
    fn snr_self_consistency() {
        for seed in 0..5 {
            let pm = PointerModel::from_snr(48.5, 100.0 * NS, 30.4 * US);
            let shots = sample_shots(&pm, 10_000, seed, no_decay()).unwrap();
            let m = extract_metrics(&fit_mixture(&shots).unwrap(), &shots);
            assert!((m.snr / 48.5 - 1.0).abs() < 0.05, "seed {seed}: {}", m.snr);
        }
    }

    #[test]
    fn overlap_error_matches_erfc() {
        let pm = PointerModel::from_snr(8.0, 100.0 * NS, 30.4 * US);
        let shots = sample_shots(&pm, 10_000, 11, no_decay()).unwrap();
        let m = extract_metrics(&fit_mixture(&shots).unwrap(), &shots);
        let expected = 0.5 * erfc(1.0);
        assert!((m.epsilon_a - expected).abs() < 3.0 * m.epsilon_a_std_error(), "{} vs {}", m.epsilon_a, expected);
        assert_eq!(m.epsilon_a, 0.5 * (m.p_e_given_g + m.p_g_given_e));
    }

    #[test]
    fn decay_only_hurts_excited_preparations() {
        let pm = PointerModel::from_snr(48.5, 400.0 * NS, 10.0 * US);
        let shots = sample_shots(&pm, 10_000, 5, ShotOptions::default()).unwrap();
        let m = extract_metrics(&fit_mixture(&shots).unwrap(), &shots);
        assert!(m.p_g_given_e > m.p_e_given_g);
    }

    #[test]
    fn identical_components_give_no_snr() {
        let pm = PointerModel::from_snr(0.0, 100.0 * NS, 30.4 * US);
        let shots = sample_shots(&pm, 5000, 2, no_decay()).unwrap();
        let fit = fit_mixture(&shots).unwrap();
        assert!(fit.merged);
        let m = extract_metrics(&fit, &shots);
        assert_eq!(m.snr, 0.0);
        assert!((m.epsilon_a - 0.5).abs() < 0.05);
    }

    #[test]
    fn broadening_widens_ground_state() {
        let pm = PointerModel::from_snr(60.0, 100.0 * NS, 30.4 * US);
        let opts = ShotOptions {
            broadening: Some(1.5),
            ..no_decay()
        };
        let shots = sample_shots(&pm, 5000, 4, opts).unwrap();
        let m = extract_metrics(&fit_mixture(&shots).unwrap(), &shots);
        assert!((m.sigma_g / m.sigma_e - 1.5).abs() < 0.05);
    }

    #[test]
    fn too_few_shots() {
        let pm = PointerModel::from_snr(20.0, 100.0 * NS, 30.4 * US);
        let shots = sample_shots(&pm, 50, 1, no_decay()).unwrap();
        assert!(fit_mixture(&shots).is_err());
    }
}
