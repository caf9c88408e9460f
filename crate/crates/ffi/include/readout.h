/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef READOUT_H
#define READOUT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum RoStatus {
  RO_STATUS_OK = 0,
  RO_STATUS_NULL_POINTER = 1,
  RO_STATUS_INVALID_ARGUMENT = 2,
  // A closed form hit a pole or degeneracy.
  RO_STATUS_SINGULAR = 3,
  RO_STATUS_PARSE = 4,
  RO_STATUS_NUMERICAL = 5,
  RO_STATUS_IO = 6,
  RO_STATUS_PANIC = 7,
} RoStatus;

// Opaque device: parameters plus the derived dispersive quantities at the
// current operating point.
typedef struct RoDevice RoDevice;

typedef struct RoDispersive {
  double omega_q_hz;
  double detuning_hz;
  double chi_hz;
  double omega_r_g_hz;
  double omega_r_e_hz;
  double j_eff_g_hz;
  double j_eff_e_hz;
  double kerr_g_hz;
  double kerr_e_hz;
  double lambda;
} RoDispersive;

typedef struct RoModes {
  double omega_l_g_hz;
  double omega_l_e_hz;
  double omega_h_g_hz;
  double omega_h_e_hz;
  double kappa_l_g_hz;
  double kappa_l_e_hz;
  double kappa_h_g_hz;
  double kappa_h_e_hz;
  double chi_l_hz;
  double chi_h_hz;
} RoModes;

typedef struct RoReadout {
  double omega_d_hz;
  double drive_hz;
  double n_crit;
  double n_g;
  double n_e;
  double snr;
  double epsilon_a;
} RoReadout;

typedef struct RoBound {
  double overlap;
  double t1;
  double total;
} RoBound;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *ro_version(void);

// Message for the last failed call on this thread (empty after a success).
// Valid until the next `ro_*` call on the same thread.
const char *ro_last_error(void);

// Creates a device from a JSON document in the device-file format (Hz).
//
// # Safety
// `json` must be a valid NUL-terminated string; `out` must be writable.
enum RoStatus ro_device_from_json(const char *json, struct RoDevice **out);

// Creates the tabulated device at a dressed detuning given in GHz (e.g. -1.3).
//
// # Safety
// `out` must be writable.
enum RoStatus ro_device_from_preset(double detuning_ghz, struct RoDevice **out);

// Moves the qubit so that `ω_q − ω_r^g` equals `detuning_hz`.
//
// # Safety
// `dev` must be a live handle.
enum RoStatus ro_device_set_detuning(struct RoDevice *dev, double detuning_hz);

// Releases a handle. Null is ignored.
//
// # Safety
// `dev` must be null or a handle not yet freed.
void ro_device_free(struct RoDevice *dev);

// # Safety
// `dev` must be a live handle; `out` must be writable.
enum RoStatus ro_device_dispersive(const struct RoDevice *dev, struct RoDispersive *out);

// # Safety
// `dev` must be a live handle; `out` must be writable.
enum RoStatus ro_device_modes(const struct RoDevice *dev, struct RoModes *out);

// # Safety
// `dev` must be a live handle; `out` must be writable.
enum RoStatus ro_device_n_crit(const struct RoDevice *dev, double *out);

// Drive frequency maximizing the pointer separation in the low-mode window.
//
// # Safety
// `dev` must be a live handle; `out` must be writable.
enum RoStatus ro_device_optimal_drive(const struct RoDevice *dev, double *omega_d_hz);

// SNR and assignment-error bound at the optimal drive frequency with
// `n_g = n_over_ncrit · n_crit`, integrating for `tau_s` with step `dt_s`
// (pass 0 for the default step).
//
// # Safety
// `dev` must be a live handle; `out` must be writable.
enum RoStatus ro_predict_readout(const struct RoDevice *dev,
                                 double n_over_ncrit,
                                 double tau_s,
                                 double dt_s,
                                 struct RoReadout *out);

// Overlap plus T1 contributions to the assignment error.
//
// # Safety
// `out` must be writable.
enum RoStatus ro_assignment_bound(double snr, double tau_s, double t1_s, struct RoBound *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* READOUT_H */
