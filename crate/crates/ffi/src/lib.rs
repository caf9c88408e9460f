//! C ABI over `readout-core`.
//!
//! Devices are opaque handles created by `ro_device_*` constructors and released
//! with `ro_device_free`. Every fallible call returns an `RoStatus`; on failure the
//! message is available from `ro_last_error` on the same thread. Frequencies
//! crossing the boundary are in Hz, times in seconds.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use readout_core::model::{derive_dispersive, n_crit, omega_q_for_detuning, DeviceFile, DeviceParams, DispersiveDerived};
use readout_core::snr::{assignment_error_bound, low_mode_window, optimal_drive_frequency, predict_readout};
use readout_core::units::{hz, to_hz};
use readout_core::{exact_modes, presets, Error};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// A closed form hit a pole or degeneracy.
    Singular = 3,
    Parse = 4,
    Numerical = 5,
    Io = 6,
    Panic = 7,
}

/// Opaque device: parameters plus the derived dispersive quantities at the
/// current operating point.
pub struct RoDevice {
    params: DeviceParams,
    derived: DispersiveDerived,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RoDispersive {
    pub omega_q_hz: f64,
    pub detuning_hz: f64,
    pub chi_hz: f64,
    pub omega_r_g_hz: f64,
    pub omega_r_e_hz: f64,
    pub j_eff_g_hz: f64,
    pub j_eff_e_hz: f64,
    pub kerr_g_hz: f64,
    pub kerr_e_hz: f64,
    pub lambda: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RoModes {
    pub omega_l_g_hz: f64,
    pub omega_l_e_hz: f64,
    pub omega_h_g_hz: f64,
    pub omega_h_e_hz: f64,
    pub kappa_l_g_hz: f64,
    pub kappa_l_e_hz: f64,
    pub kappa_h_g_hz: f64,
    pub kappa_h_e_hz: f64,
    pub chi_l_hz: f64,
    pub chi_h_hz: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RoBound {
    pub overlap: f64,
    pub t1: f64,
    pub total: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RoReadout {
    pub omega_d_hz: f64,
    pub drive_hz: f64,
    pub n_crit: f64,
    pub n_g: f64,
    pub n_e: f64,
    pub snr: f64,
    pub epsilon_a: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> RoStatus {
    match e {
        Error::InvalidParams(_) | Error::Input(_) | Error::StepSize { .. } | Error::Span { .. } | Error::Truncation { .. } => {
            RoStatus::InvalidArgument
        }
        Error::Pole { .. } | Error::DegenerateMode { .. } | Error::ZeroSeparation => RoStatus::Singular,
        Error::Parse { .. } | Error::Json(_) | Error::Csv(_) => RoStatus::Parse,
        Error::Io(_) => RoStatus::Io,
        _ => RoStatus::Numerical,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (RoStatus, String)>) -> RoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            RoStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            RoStatus::Panic
        }
    }
}

fn core<T>(r: readout_core::Result<T>) -> Result<T, (RoStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (RoStatus, String) {
    (RoStatus::NullPointer, format!("{what} is null"))
}

fn device_ref<'a>(dev: *const RoDevice) -> Result<&'a RoDevice, (RoStatus, String)> {
    // SAFETY: non-null handles come from ro_device_* constructors.
    unsafe { dev.as_ref() }.ok_or_else(|| null("device"))
}

fn write_out<T>(out: *mut T, value: T) -> Result<(), (RoStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    // SAFETY: caller provides a valid, writable T.
    unsafe { out.write(value) };
    Ok(())
}

fn make_device(params: DeviceParams, out: *mut *mut RoDevice) -> Result<(), (RoStatus, String)> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    let derived = core(derive_dispersive(&params, None))?;
    let handle = Box::into_raw(Box::new(RoDevice { params, derived }));
    // SAFETY: checked non-null above.
    unsafe { out.write(handle) };
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ro_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread (empty after a success).
/// Valid until the next `ro_*` call on the same thread.
#[no_mangle]
pub extern "C" fn ro_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates a device from a JSON document in the device-file format (Hz).
///
/// # Safety
/// `json` must be a valid NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ro_device_from_json(json: *const c_char, out: *mut *mut RoDevice) -> RoStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = unsafe { CStr::from_ptr(json) }
            .to_str()
            .map_err(|e| (RoStatus::Parse, format!("json is not UTF-8: {e}")))?;
        let file: DeviceFile = core(serde_json::from_str(text).map_err(Error::from))?;
        let params = core(DeviceParams::from_file(&file))?;
        make_device(params, out)
    })
}

/// Creates the tabulated device at a dressed detuning given in GHz (e.g. -1.3).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ro_device_from_preset(detuning_ghz: f64, out: *mut *mut RoDevice) -> RoStatus {
    guard(|| {
        let point = presets::operating_point(detuning_ghz)
            .ok_or_else(|| (RoStatus::InvalidArgument, format!("no preset at {detuning_ghz} GHz")))?;
        make_device(point.device(), out)
    })
}

/// Moves the qubit so that `ω_q − ω_r^g` equals `detuning_hz`.
///
/// # Safety
/// `dev` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ro_device_set_detuning(dev: *mut RoDevice, detuning_hz: f64) -> RoStatus {
    guard(|| {
        // SAFETY: non-null handles come from ro_device_* constructors.
        let d = unsafe { dev.as_mut() }.ok_or_else(|| null("device"))?;
        let wq = core(omega_q_for_detuning(&d.params, hz(detuning_hz)))?;
        d.derived = core(derive_dispersive(&d.params, Some(wq)))?;
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `dev` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ro_device_free(dev: *mut RoDevice) {
    if !dev.is_null() {
        // SAFETY: created by Box::into_raw in make_device.
        drop(unsafe { Box::from_raw(dev) });
    }
}

/// # Safety
/// `dev` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ro_device_dispersive(dev: *const RoDevice, out: *mut RoDispersive) -> RoStatus {
    guard(|| {
        let d = &device_ref(dev)?.derived;
        write_out(
            out,
            RoDispersive {
                omega_q_hz: to_hz(d.omega_q),
                detuning_hz: to_hz(d.delta_qr),
                chi_hz: to_hz(d.chi),
                omega_r_g_hz: to_hz(d.omega_r_g),
                omega_r_e_hz: to_hz(d.omega_r_e),
                j_eff_g_hz: to_hz(d.j_eff_g),
                j_eff_e_hz: to_hz(d.j_eff_e),
                kerr_g_hz: to_hz(d.kerr_g),
                kerr_e_hz: to_hz(d.kerr_e),
                lambda: d.lambda,
            },
        )
    })
}

/// # Safety
/// `dev` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ro_device_modes(dev: *const RoDevice, out: *mut RoModes) -> RoStatus {
    guard(|| {
        let d = device_ref(dev)?;
        let m = exact_modes(&d.derived, &d.params);
        write_out(
            out,
            RoModes {
                omega_l_g_hz: to_hz(m.omega_l_g),
                omega_l_e_hz: to_hz(m.omega_l_e),
                omega_h_g_hz: to_hz(m.omega_h_g),
                omega_h_e_hz: to_hz(m.omega_h_e),
                kappa_l_g_hz: to_hz(m.kappa_l_g),
                kappa_l_e_hz: to_hz(m.kappa_l_e),
                kappa_h_g_hz: to_hz(m.kappa_h_g),
                kappa_h_e_hz: to_hz(m.kappa_h_e),
                chi_l_hz: to_hz(m.chi_l),
                chi_h_hz: to_hz(m.chi_h),
            },
        )
    })
}

/// # Safety
/// `dev` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ro_device_n_crit(dev: *const RoDevice, out: *mut f64) -> RoStatus {
    guard(|| {
        let d = device_ref(dev)?;
        write_out(out, core(n_crit(&d.params, &d.derived))?)
    })
}

/// Drive frequency maximizing the pointer separation in the low-mode window.
///
/// # Safety
/// `dev` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ro_device_optimal_drive(dev: *const RoDevice, omega_d_hz: *mut f64) -> RoStatus {
    guard(|| {
        let d = device_ref(dev)?;
        let w = core(optimal_drive_frequency(&d.derived, &d.params, low_mode_window(&d.derived, &d.params)))?;
        write_out(omega_d_hz, to_hz(w))
    })
}

/// SNR and assignment-error bound at the optimal drive frequency with
/// `n_g = n_over_ncrit · n_crit`, integrating for `tau_s` with step `dt_s`
/// (pass 0 for the default step).
///
/// # Safety
/// `dev` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ro_predict_readout(
    dev: *const RoDevice,
    n_over_ncrit: f64,
    tau_s: f64,
    dt_s: f64,
    out: *mut RoReadout,
) -> RoStatus {
    guard(|| {
        let d = device_ref(dev)?;
        let dt = if dt_s == 0.0 { readout_core::dynamics::DEFAULT_DT } else { dt_s };
        let p = core(predict_readout(&d.params, &d.derived, n_over_ncrit, tau_s, dt))?;
        write_out(
            out,
            RoReadout {
                omega_d_hz: to_hz(p.omega_d),
                drive_hz: to_hz(p.amplitude),
                n_crit: p.n_crit,
                n_g: p.metrics.n_g,
                n_e: p.metrics.n_e,
                snr: p.metrics.snr,
                epsilon_a: p.metrics.epsilon_a,
            },
        )
    })
}

/// Overlap plus T1 contributions to the assignment error.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ro_assignment_bound(snr: f64, tau_s: f64, t1_s: f64, out: *mut RoBound) -> RoStatus {
    guard(|| {
        if !(snr >= 0.0 && tau_s >= 0.0 && t1_s > 0.0) {
            return Err((RoStatus::InvalidArgument, "need snr ≥ 0, tau ≥ 0, t1 > 0".into()));
        }
        let b = assignment_error_bound(snr, tau_s, t1_s);
        write_out(
            out,
            RoBound {
                overlap: b.overlap,
                t1: b.t1,
                total: b.total,
            },
        )
    })
}
