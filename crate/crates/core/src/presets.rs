//! Reference operating points of the measured device (one per qubit–resonator
//! detuning), as fitted from transmission spectroscopy.

use crate::model::{DeviceParams, DEFAULT_ETA};
use crate::units::mhz;

pub const KAPPA_P_MHZ: f64 = 34.5;
pub const J_MHZ: f64 = 27.9;
pub const OMEGA_P_MHZ: f64 = 6899.86;
pub const ALPHA_MHZ: f64 = -181.0;
pub const T1_S: f64 = 30.4e-6;

/// One fitted operating point. Frequencies in MHz (ordinary, not angular).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub detuning_ghz: f64,
    pub omega_q_mhz: f64,
    pub omega_r_bare_mhz: f64,
    pub omega_r_g_mhz: f64,
    pub omega_d_mhz: f64,
    pub g_bare_mhz: f64,
    pub g_charge_mhz: f64,
    pub kappa_l_g_mhz: f64,
    pub kappa_l_e_mhz: f64,
    pub kappa_h_g_mhz: f64,
    pub kappa_h_e_mhz: f64,
    pub two_chi_l_mhz: f64,
    pub two_chi_h_mhz: f64,
    pub n_crit: f64,
}

impl OperatingPoint {
    pub fn device(&self) -> DeviceParams {
        DeviceParams {
            omega_q: mhz(self.omega_q_mhz),
            alpha: mhz(ALPHA_MHZ),
            g_charge: mhz(self.g_charge_mhz),
            g_bare: mhz(self.g_bare_mhz),
            omega_r_bare: mhz(self.omega_r_bare_mhz),
            omega_p: mhz(OMEGA_P_MHZ),
            j: mhz(J_MHZ),
            kappa_p: mhz(KAPPA_P_MHZ),
            t1: T1_S,
            eta: DEFAULT_ETA,
            omega_r_dressed: Some(mhz(self.omega_r_g_mhz)),
        }
    }
}

/// Operating points ordered from the largest to the smallest |Δ_qr|.
pub const TABLE_ONE: [OperatingPoint; 5] = [
    OperatingPoint {
        detuning_ghz: -2.7,
        omega_q_mhz: 4144.0,
        omega_r_bare_mhz: 6854.63,
        omega_r_g_mhz: 6876.27,
        omega_d_mhz: 6857.4,
        g_bare_mhz: 224.32,
        g_charge_mhz: 284.01,
        kappa_l_g_mhz: 10.16,
        kappa_l_e_mhz: 8.88,
        kappa_h_g_mhz: 23.86,
        kappa_h_e_mhz: 25.14,
        two_chi_l_mhz: -4.17,
        two_chi_h_mhz: -1.50,
        n_crit: 23.14,
    },
    OperatingPoint {
        detuning_ghz: -2.4,
        omega_q_mhz: 4500.0,
        omega_r_bare_mhz: 6858.02,
        omega_r_g_mhz: 6881.98,
        omega_d_mhz: 6861.2,
        g_bare_mhz: 205.61,
        g_charge_mhz: 271.40,
        kappa_l_g_mhz: 11.61,
        kappa_l_e_mhz: 10.03,
        kappa_h_g_mhz: 22.41,
        kappa_h_e_mhz: 23.99,
        two_chi_l_mhz: -4.35,
        two_chi_h_mhz: -1.90,
        n_crit: 19.26,
    },
    OperatingPoint {
        detuning_ghz: -1.9,
        omega_q_mhz: 5000.0,
        omega_r_bare_mhz: 6857.98,
        omega_r_g_mhz: 6896.09,
        omega_d_mhz: 6870.0,
        g_bare_mhz: 211.49,
        g_charge_mhz: 293.71,
        kappa_l_g_mhz: 15.81,
        kappa_l_e_mhz: 12.66,
        kappa_h_g_mhz: 18.21,
        kappa_h_e_mhz: 21.36,
        two_chi_l_mhz: -6.11,
        two_chi_h_mhz: -4.24,
        n_crit: 10.42,
    },
    OperatingPoint {
        detuning_ghz: -1.6,
        omega_q_mhz: 5300.0,
        omega_r_bare_mhz: 6859.74,
        omega_r_g_mhz: 6906.33,
        omega_d_mhz: 6874.0,
        g_bare_mhz: 204.2,
        g_charge_mhz: 292.27,
        kappa_l_g_mhz: 19.07,
        kappa_l_e_mhz: 14.84,
        kappa_h_g_mhz: 14.95,
        kappa_h_e_mhz: 19.18,
        two_chi_l_mhz: -6.69,
        two_chi_h_mhz: -6.64,
        n_crit: 7.55,
    },
    OperatingPoint {
        detuning_ghz: -1.3,
        omega_q_mhz: 5600.0,
        omega_r_bare_mhz: 6864.86,
        omega_r_g_mhz: 6928.43,
        omega_d_mhz: 6881.6,
        g_bare_mhz: 205.53,
        g_charge_mhz: 302.34,
        kappa_l_g_mhz: 25.00,
        kappa_l_e_mhz: 19.87,
        kappa_h_g_mhz: 9.02,
        kappa_h_e_mhz: 14.15,
        two_chi_l_mhz: -6.31,
        two_chi_h_mhz: -13.18,
        n_crit: 4.83,
    },
];

pub fn operating_point(detuning_ghz: f64) -> Option<&'static OperatingPoint> {
    TABLE_ONE
        .iter()
        .find(|p| (p.detuning_ghz - detuning_ghz).abs() < 1e-9)
}
