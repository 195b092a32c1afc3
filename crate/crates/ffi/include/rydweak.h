#ifndef RYDWEAK_H
#define RYDWEAK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of a call. Values 1 to 13 match the simulator's error codes.
typedef enum RwStatus {
  RW_STATUS_OK = 0,
  RW_STATUS_INVALID_ARGUMENT = 1,
  RW_STATUS_INVALID_PARAMETER = 2,
  RW_STATUS_ORTHOGONAL_POSTSELECTION = 3,
  RW_STATUS_ACCURACY = 4,
  RW_STATUS_PRECONDITION = 5,
  RW_STATUS_UNRESOLVED_SPLITTING = 6,
  RW_STATUS_DOMAIN = 7,
  RW_STATUS_FIT_FAILURE = 8,
  RW_STATUS_INSTABILITY = 9,
  RW_STATUS_IO = 10,
  RW_STATUS_CONFIG_PARSE = 11,
  RW_STATUS_CONFIG_VALIDATION = 12,
  RW_STATUS_SERIALIZATION = 13,
  // A required pointer argument was null.
  RW_STATUS_NULL_POINTER = 100,
  // A string argument was not valid UTF-8.
  RW_STATUS_INVALID_UTF8 = 101,
  // The simulator panicked; the handle involved should be freed.
  RW_STATUS_PANIC = 102,
} RwStatus;

// A loaded experiment configuration.
typedef struct RwConfig RwConfig;

// Atomic medium parameters.
typedef struct RwMedium RwMedium;

// Readout of the post-selected pointer.
typedef struct RwPointerReadout {
  // Centroid shift, m.
  double centroid;
  // Intensity contrast ratio.
  double eta;
  // Post-selection probability.
  double p_post;
} RwPointerReadout;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *rw_version(void);

// Length in bytes of the last error message on this thread, excluding the
// terminating NUL. Zero after a successful call.
size_t rw_last_error_length(void);

// Copies the last error message into `buf` (at most `len` bytes including
// the terminating NUL, truncating if needed). Returns the number of bytes
// written excluding the NUL.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t rw_last_error_message(char *buf, size_t len);

// Creates a medium with default parameters: atoms at rest, or the thermal
// vapor when `thermal` is true.
//
// # Safety
// `out` must be a valid pointer to a handle slot.
enum RwStatus rw_medium_new(bool thermal, struct RwMedium **out);

// Creates a medium from a JSON object; missing fields take their defaults.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum RwStatus rw_medium_from_json(const char *json, struct RwMedium **out);

// Sets one numeric medium parameter by its field name (for example
// `"omega_mw"`). Booleans take 0 or 1.
//
// # Safety
// `medium` must be a live handle and `name` a NUL-terminated string.
enum RwStatus rw_medium_set(struct RwMedium *medium, const char *name, double value);

// Reads one numeric medium parameter by field name.
//
// # Safety
// `medium` must be a live handle, `name` a NUL-terminated string and
// `out` a valid pointer.
enum RwStatus rw_medium_get(const struct RwMedium *medium, const char *name, double *out);

// Releases a medium. Null is ignored.
//
// # Safety
// `medium` must be null or a handle not yet freed.
void rw_medium_free(struct RwMedium *medium);

// Susceptibility at probe detuning `delta_p` (rad/s), thermally averaged
// when the medium has Doppler broadening enabled.
//
// # Safety
// `medium` must be a live handle; `re` and `im` valid pointers.
enum RwStatus rw_susceptibility(const struct RwMedium *medium,
                                double delta_p,
                                double *re,
                                double *im);

// Phase and log-amplitude picked up in one pass of the medium at probe
// detuning `delta_p` (rad/s).
//
// # Safety
// `medium` must be a live handle; `delta_phi` and `delta_beta` valid pointers.
enum RwStatus rw_phase_absorption(const struct RwMedium *medium,
                                  double delta_p,
                                  double *delta_phi,
                                  double *delta_beta);

// Exact pointer readout for pre-selection `(delta_phi, delta_beta)`,
// post-selection angle `angle` (rad), kick `k` (rad/m) and width `w` (m).
//
// # Safety
// `out` must be a valid pointer.
enum RwStatus rw_pointer_readout(double delta_phi,
                                 double delta_beta,
                                 double angle,
                                 double k,
                                 double w,
                                 struct RwPointerReadout *out);

// Weak value of the which-path operator.
//
// # Safety
// `re` and `im` must be valid pointers.
enum RwStatus rw_weak_value(double delta_phi,
                            double delta_beta,
                            double angle,
                            double *re,
                            double *im);

// Atomic projection-noise limit `1/(T √N)`, Hz.
//
// # Safety
// `out` must be a valid pointer.
enum RwStatus rw_atomic_shot_noise(double t_meas, double n_atoms, double *out);

// Photon shot-noise phase limit `1/√N`, rad.
//
// # Safety
// `out` must be a valid pointer.
enum RwStatus rw_photon_shot_noise(double n_photons, double *out);

// Loads and validates an experiment config file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum RwStatus rw_config_load(const char *path, struct RwConfig **out);

// Parses and validates an experiment config from JSON text.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum RwStatus rw_config_parse(const char *json, struct RwConfig **out);

// Overrides the output directory.
//
// # Safety
// `config` must be a live handle and `dir` a NUL-terminated string.
enum RwStatus rw_config_set_output_dir(struct RwConfig *config, const char *dir);

// Overrides the random seed.
//
// # Safety
// `config` must be a live handle.
enum RwStatus rw_config_set_seed(struct RwConfig *config, uint64_t seed);

// Runs the experiment, writing its files and manifest into the config's
// output directory.
//
// # Safety
// `config` must be a live handle.
enum RwStatus rw_run(const struct RwConfig *config);

// Releases a config. Null is ignored.
//
// # Safety
// `config` must be null or a handle not yet freed.
void rw_config_free(struct RwConfig *config);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RYDWEAK_H */
