//! Photon-number and drive-amplitude calibration from the ac-Stark shift of the qubit.

use serde::Serialize;

use crate::dynamics::{steady_state, DriveSpec};
use crate::error::{Error, Result};
use crate::lm::{levenberg_marquardt, LmOptions};
use crate::model::{DeviceParams, DispersiveDerived};
use crate::normal_modes::exact_modes;

/// Stark-shift measurement versus drive setting.
#[derive(Debug, Clone, PartialEq)]
pub struct StarkDataset {
    /// Drive settings (arbitrary units, or 𝓔 in rad/s for synthetic data).
    pub powers: Vec<f64>,
    /// Measured Δ_ac in rad/s.
    pub shifts: Vec<f64>,
    pub qubit_freq: f64,
}

impl StarkDataset {
    pub fn validate(&self) -> Result<()> {
        if self.powers.len() != self.shifts.len() || self.powers.is_empty() {
            return Err(Error::Input(format!(
                "stark dataset needs equal, non-empty columns ({} powers, {} shifts)",
                self.powers.len(),
                self.shifts.len()
            )));
        }
        Ok(())
    }
}

/// `n_g = Δ_ac / 2(χ_l + χ_h)`.
pub fn photons_from_stark(shift: f64, chi_l: f64, chi_h: f64) -> Result<f64> {
    let total = chi_l + chi_h;
    if total == 0.0 {
        return Err(Error::Pole {
            quantity: "photons_from_stark",
            detail: "χ_l + χ_h = 0".into(),
        });
    }
    Ok(shift / (2.0 * total))
}

/// Drive amplitude that puts `n_g` photons in the resonator (qubit in g) at `omega_d`.
pub fn drive_amplitude_from_photons(
    n_g: f64,
    derived: &DispersiveDerived,
    params: &DeviceParams,
    omega_d: f64,
) -> Result<f64> {
    if n_g < 0.0 || !n_g.is_finite() {
        return Err(Error::Input(format!("photon number must be ≥ 0 (got {n_g})")));
    }
    let unit = steady_state(derived, params, &DriveSpec::constant(omega_d, 1.0, 1.0)).alpha_g;
    if unit.norm() == 0.0 {
        return Err(Error::Pole {
            quantity: "drive_amplitude_from_photons",
            detail: "resonator decoupled from the drive (α_ss = 0 per unit drive)".into(),
        });
    }
    Ok(n_g.sqrt() / unit.norm())
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub powers: Vec<f64>,
    pub n_g: Vec<f64>,
    /// rad/s
    pub amplitudes: Vec<f64>,
    /// Least-squares slope of 𝓔 against drive setting (through the origin).
    pub amplitude_per_setting: f64,
    /// Exponent of `n_g ∝ setting^p` from a log–log fit over positive points.
    pub power_law_exponent: Option<f64>,
}

/// Converts each Stark shift to `n_g` and the drive amplitude that produces it.
pub fn calibrate(dataset: &StarkDataset, derived: &DispersiveDerived, params: &DeviceParams, omega_d: f64) -> Result<CalibrationReport> {
    dataset.validate()?;
    let modes = exact_modes(derived, params);
    let n_g = dataset
        .shifts
        .iter()
        .map(|&s| photons_from_stark(s, modes.chi_l, modes.chi_h))
        .collect::<Result<Vec<_>>>()?;
    let amplitudes = n_g
        .iter()
        .map(|&n| drive_amplitude_from_photons(n.max(0.0), derived, params, omega_d))
        .collect::<Result<Vec<_>>>()?;
    let sxx: f64 = dataset.powers.iter().map(|p| p * p).sum();
    let sxy: f64 = dataset.powers.iter().zip(&amplitudes).map(|(p, a)| p * a).sum();
    let amplitude_per_setting = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    Ok(CalibrationReport {
        powers: dataset.powers.clone(),
        power_law_exponent: power_law_exponent(&dataset.powers, &n_g),
        n_g,
        amplitudes,
        amplitude_per_setting,
    })
}

/// Slope of `ln y` against `ln x` over points with both coordinates positive.
pub fn power_law_exponent(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Per-photon Stark shift from the two conventions in use: `2g²/Δ_qr` and `2(χ_l + χ_h)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StarkConventions {
    pub lamb_per_photon: f64,
    pub dispersive_per_photon: f64,
    pub ratio: f64,
}

pub fn stark_conventions(derived: &DispersiveDerived, params: &DeviceParams) -> StarkConventions {
    let m = exact_modes(derived, params);
    let lamb = 2.0 * params.g_charge * params.g_charge / derived.delta_qr;
    let disp = 2.0 * (m.chi_l + m.chi_h);
    StarkConventions {
        lamb_per_photon: lamb,
        dispersive_per_photon: disp,
        ratio: lamb / disp,
    }
}

/// `offset + amplitude · exp(−(x − center)²/(2 width²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianPeak {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
    pub offset: f64,
}

impl GaussianPeak {
    pub fn eval(&self, x: f64) -> f64 {
        self.offset + self.amplitude * (-(x - self.center).powi(2) / (2.0 * self.width * self.width)).exp()
    }
}

/// Least-squares Gaussian fit, used to locate the Stark-shifted qubit line in a
/// spectroscopy trace.
pub fn fit_gaussian_peak(x: &[f64], y: &[f64]) -> Result<GaussianPeak> {
    if x.len() != y.len() || x.len() < 5 {
        return Err(Error::Input("gaussian fit needs ≥ 5 paired samples".into()));
    }
    let (xmin, xmax) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = (xmax - xmin).max(f64::MIN_POSITIVE);
    let ymin = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let ymax = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let yscale = (ymax - ymin).max(f64::MIN_POSITIVE);
    let imax = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap();
    // half-maximum width seed
    let above = y.iter().filter(|&&v| v - ymin > 0.5 * (ymax - ymin)).count() as f64;
    let width0 = (above / x.len() as f64 * span / 2.355).max(span / x.len() as f64);

    let xs: Vec<f64> = x.iter().map(|v| (v - xmin) / span).collect();
    let ys: Vec<f64> = y.iter().map(|v| (v - ymin) / yscale).collect();
    let f = |p: &[f64], out: &mut [f64]| {
        for k in 0..xs.len() {
            let z = (xs[k] - p[0]) / p[1];
            out[k] = p[3] + p[2] * (-0.5 * z * z).exp() - ys[k];
        }
    };
    let x0 = [xs[imax], width0 / span, 1.0, 0.0];
    let rep = levenberg_marquardt(f, &x0, xs.len(), LmOptions::default())?;
    let p = rep.params;
    Ok(GaussianPeak {
        center: xmin + p[0] * span,
        width: p[1].abs() * span,
        amplitude: p[2] * yscale,
        offset: ymin + p[3] * yscale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::derive_dispersive;
    use crate::presets::TABLE_ONE;
    use crate::units::mhz;

    #[test]
    fn stark_to_photons() {
        assert_eq!(photons_from_stark(0.0, mhz(-2.0), mhz(-1.0)).unwrap(), 0.0);
        let (cl, ch) = (mhz(-2.085), mhz(-0.75));
        assert!((photons_from_stark(2.0 * (cl + ch), cl, ch).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(photons_from_stark(1.0, 1.0, -1.0), Err(Error::Pole { .. })));
    }

    #[test]
    fn stark_round_trip_through_steady_state() {
        let p = TABLE_ONE[0].device();
        let d = derive_dispersive(&p, None).unwrap();
        let m = exact_modes(&d, &p);
        let w = mhz(TABLE_ONE[0].omega_d_mhz);
        let drive = DriveSpec::constant(w, mhz(7.3), 1e-6);
        let n = steady_state(&d, &p, &drive).alpha_g.norm_sqr();
        let shift = 2.0 * (m.chi_l + m.chi_h) * n;
        let back = photons_from_stark(shift, m.chi_l, m.chi_h).unwrap();
        assert!((back - n).abs() < 1e-10 * n);
    }

    #[test]
    fn amplitude_inverts_photon_number() {
        let p = TABLE_ONE[0].device();
        let d = derive_dispersive(&p, None).unwrap();
        let w = mhz(TABLE_ONE[0].omega_d_mhz);
        assert_eq!(drive_amplitude_from_photons(0.0, &d, &p, w).unwrap(), 0.0);
        for n in [0.1, 1.0, 12.5] {
            let amp = drive_amplitude_from_photons(n, &d, &p, w).unwrap();
            let got = steady_state(&d, &p, &DriveSpec::constant(w, amp, 1e-6)).alpha_g.norm_sqr();
            assert!((got - n).abs() < 1e-10 * n);
        }
    }

    #[test]
    fn decoupled_resonator_cannot_be_calibrated() {
        let p = TABLE_ONE[0].device();
        let mut d = derive_dispersive(&p, None).unwrap();
        d.j_eff_g = 0.0;
        let r = drive_amplitude_from_photons(1.0, &d, &p, p.omega_p);
        assert!(matches!(r, Err(Error::Pole { .. })));
    }

    #[test]
    fn amplitude_transfers_across_detunings() {
        let ref_col = TABLE_ONE[0];
        let p = ref_col.device();
        let d = derive_dispersive(&p, None).unwrap();
        let w = mhz(ref_col.omega_d_mhz);
        let amp = drive_amplitude_from_photons(1.0, &d, &p, w).unwrap();

        let other = TABLE_ONE[4].device();
        let od = derive_dispersive(&other, None).unwrap();
        let wo = mhz(TABLE_ONE[4].omega_d_mhz);
        let drive = DriveSpec::constant(wo, amp, 1e-6);
        let direct = steady_state(&od, &other, &drive).alpha_g.norm_sqr();
        let den = Complex::new(od.omega_r_g - wo, 0.0) * Complex::new(other.omega_p - wo, -other.kappa_p / 2.0) - other.j * other.j;
        let by_formula = (other.j * amp / den).norm_sqr();
        assert!((direct - by_formula).abs() < 1e-10 * direct);
    }

    use num_complex::Complex;

    #[test]
    fn synthetic_sweep_is_quadratic() {
        let p = TABLE_ONE[0].device();
        let d = derive_dispersive(&p, None).unwrap();
        let m = exact_modes(&d, &p);
        let w = mhz(TABLE_ONE[0].omega_d_mhz);
        let powers: Vec<f64> = (1..=12).map(|k| mhz(k as f64)).collect();
        let shifts: Vec<f64> = powers
            .iter()
            .map(|&e| 2.0 * (m.chi_l + m.chi_h) * steady_state(&d, &p, &DriveSpec::constant(w, e, 1e-6)).alpha_g.norm_sqr())
            .collect();
        let ds = StarkDataset {
            powers: powers.clone(),
            shifts,
            qubit_freq: p.omega_q,
        };
        let rep = calibrate(&ds, &d, &p, w).unwrap();
        let exponent = rep.power_law_exponent.unwrap();
        assert!((exponent - 2.0).abs() < 0.01, "{exponent}");
        for (a, e) in rep.amplitudes.iter().zip(&powers) {
            assert!((a - e).abs() < 1e-9 * e);
        }
        assert!((rep.amplitude_per_setting - 1.0).abs() < 1e-9);
        let lin = calibrate(
            &StarkDataset {
                powers: vec![1.0],
                shifts: vec![2.0 * ds.shifts[0]],
                qubit_freq: p.omega_q,
            },
            &d,
            &p,
            w,
        )
        .unwrap();
        assert!((lin.n_g[0] - 2.0 * rep.n_g[0]).abs() < 1e-12 * rep.n_g[0]);
    }

    #[test]
    fn gaussian_peak_fit() {
        let truth = GaussianPeak {
            center: mhz(4140.3),
            width: mhz(0.8),
            amplitude: 0.9,
            offset: 0.03,
        };
        let xs: Vec<f64> = (0..81).map(|k| mhz(4136.0 + 0.1 * k as f64)).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| truth.eval(x)).collect();
        let fit = fit_gaussian_peak(&xs, &ys).unwrap();
        assert!((fit.center - truth.center).abs() < 1e-6 * truth.width);
        assert!((fit.width - truth.width).abs() < 1e-6 * truth.width);
        assert!((fit.amplitude - truth.amplitude).abs() < 1e-6);
    }

    #[test]
    fn conventions_are_reported() {
        let p = TABLE_ONE[0].device();
        let d = derive_dispersive(&p, None).unwrap();
        let c = stark_conventions(&d, &p);
        assert!(c.lamb_per_photon < 0.0 && c.dispersive_per_photon < 0.0);
        assert!(c.ratio.is_finite());
    }
}
