//! Conversions between ordinary frequency (Hz) and angular frequency (rad/s).
//!
//! Everything inside the crate is in rad/s and seconds; files and the CLI use Hz.

use std::f64::consts::TAU;

#[inline]
pub fn hz(f_hz: f64) -> f64 {
    TAU * f_hz
}

#[inline]
pub fn mhz(f_mhz: f64) -> f64 {
    TAU * 1e6 * f_mhz
}

#[inline]
pub fn ghz(f_ghz: f64) -> f64 {
    TAU * 1e9 * f_ghz
}

#[inline]
pub fn to_hz(omega: f64) -> f64 {
    omega / TAU
}

#[inline]
pub fn to_mhz(omega: f64) -> f64 {
    omega / (TAU * 1e6)
}

pub const NS: f64 = 1e-9;
pub const US: f64 = 1e-6;
