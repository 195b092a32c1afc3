//! C ABI for the rydweak simulator.
//!
//! Every fallible function returns an [`RwStatus`]; on failure the message
//! is kept per thread and can be read with [`rw_last_error_message`].
//! Objects are opaque handles created by `*_new`/`*_load` functions and
//! released with the matching `*_free`. Outputs are written through
//! caller-provided pointers and left untouched on failure.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use rydweak::config::{load_config, parse_config, ExperimentConfig};
use rydweak::eit::{phase_and_absorption, susceptibility, LadderSystemParams};
use rydweak::heterodyne::thermal_medium;
use rydweak::limits::{atomic_shot_noise, photon_shot_noise};
use rydweak::pointer::{
    closed_form_readout, weak_value, PostSelection, PreSelection, WeakCoupling,
};
use rydweak::Error;

/// Result of a call. Values 1 to 13 match the simulator's error codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RwStatus {
    Ok = 0,
    InvalidArgument = 1,
    InvalidParameter = 2,
    OrthogonalPostselection = 3,
    Accuracy = 4,
    Precondition = 5,
    UnresolvedSplitting = 6,
    Domain = 7,
    FitFailure = 8,
    Instability = 9,
    Io = 10,
    ConfigParse = 11,
    ConfigValidation = 12,
    Serialization = 13,
    /// A required pointer argument was null.
    NullPointer = 100,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 101,
    /// The simulator panicked; the handle involved should be freed.
    Panic = 102,
}

impl RwStatus {
    fn from_error(e: &Error) -> RwStatus {
        match e.code() {
            1 => RwStatus::InvalidArgument,
            2 => RwStatus::InvalidParameter,
            3 => RwStatus::OrthogonalPostselection,
            4 => RwStatus::Accuracy,
            5 => RwStatus::Precondition,
            6 => RwStatus::UnresolvedSplitting,
            7 => RwStatus::Domain,
            8 => RwStatus::FitFailure,
            9 => RwStatus::Instability,
            10 => RwStatus::Io,
            11 => RwStatus::ConfigParse,
            12 => RwStatus::ConfigValidation,
            _ => RwStatus::Serialization,
        }
    }
}

/// Atomic medium parameters.
pub struct RwMedium {
    params: LadderSystemParams,
}

/// A loaded experiment configuration.
pub struct RwConfig {
    config: ExperimentConfig,
}

/// Readout of the post-selected pointer.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RwPointerReadout {
    /// Centroid shift, m.
    pub centroid: f64,
    /// Intensity contrast ratio.
    pub eta: f64,
    /// Post-selection probability.
    pub p_post: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| {
        let mut v = msg.into_bytes();
        v.retain(|b| *b != 0);
        *e.borrow_mut() = v;
    });
}

fn clear_error() {
    LAST_ERROR.with(|e| e.borrow_mut().clear());
}

struct Failure(RwStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(RwStatus::from_error(&e), e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(RwStatus::NullPointer, format!("`{name}` is null"))
}

// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            clear_error();
            RwStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            RwStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        Failure(
            RwStatus::InvalidUtf8,
            format!("`{name}` is not valid UTF-8"),
        )
    })
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Length in bytes of the last error message on this thread, excluding the
/// terminating NUL. Zero after a successful call.
#[no_mangle]
pub extern "C" fn rw_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().len())
}

/// Copies the last error message into `buf` (at most `len` bytes including
/// the terminating NUL, truncating if needed). Returns the number of bytes
/// written excluding the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn rw_last_error_message(buf: *mut c_char, len: usize) -> usize {
    if buf.is_null() || len == 0 {
        return 0;
    }
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let n = msg.len().min(len - 1);
        ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
        *buf.add(n) = 0;
        n
    })
}

/// Creates a medium with default parameters: atoms at rest, or the thermal
/// vapor when `thermal` is true.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn rw_medium_new(thermal: bool, out: *mut *mut RwMedium) -> RwStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let params = if thermal {
            thermal_medium()
        } else {
            LadderSystemParams::default()
        };
        *out = Box::into_raw(Box::new(RwMedium { params }));
        Ok(())
    })
}

/// Creates a medium from a JSON object; missing fields take their defaults.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rw_medium_from_json(
    json: *const c_char,
    out: *mut *mut RwMedium,
) -> RwStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let out = out_arg(out, "out")?;
        let params: LadderSystemParams = serde_json::from_str(text).map_err(|e| {
            Failure(
                RwStatus::ConfigParse,
                format!(
                    "medium JSON at line {}, column {}: {e}",
                    e.line(),
                    e.column()
                ),
            )
        })?;
        params.validate()?;
        *out = Box::into_raw(Box::new(RwMedium { params }));
        Ok(())
    })
}

/// Sets one numeric medium parameter by its field name (for example
/// `"omega_mw"`). Booleans take 0 or 1.
///
/// # Safety
/// `medium` must be a live handle and `name` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rw_medium_set(
    medium: *mut RwMedium,
    name: *const c_char,
    value: f64,
) -> RwStatus {
    guard(|| {
        let m = out_arg(medium, "medium")?;
        let key = str_arg(name, "name")?;
        let mut v = serde_json::to_value(&m.params).map_err(Error::from)?;
        let slot = v.get_mut(key).ok_or_else(|| {
            Failure(
                RwStatus::InvalidParameter,
                format!("unknown medium parameter `{key}`"),
            )
        })?;
        *slot = if slot.is_boolean() {
            serde_json::Value::Bool(value != 0.0)
        } else {
            serde_json::Number::from_f64(value)
                .map(serde_json::Value::Number)
                .ok_or_else(|| {
                    Failure(
                        RwStatus::InvalidParameter,
                        format!("`{key}` must be finite"),
                    )
                })?
        };
        let params: LadderSystemParams = serde_json::from_value(v).map_err(Error::from)?;
        params.validate()?;
        m.params = params;
        Ok(())
    })
}

/// Reads one numeric medium parameter by field name.
///
/// # Safety
/// `medium` must be a live handle, `name` a NUL-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rw_medium_get(
    medium: *const RwMedium,
    name: *const c_char,
    out: *mut f64,
) -> RwStatus {
    guard(|| {
        let m = handle(medium, "medium")?;
        let key = str_arg(name, "name")?;
        let out = out_arg(out, "out")?;
        let v = serde_json::to_value(&m.params).map_err(Error::from)?;
        *out = match v.get(key) {
            Some(serde_json::Value::Number(n)) => n.as_f64().unwrap_or(f64::NAN),
            Some(serde_json::Value::Bool(b)) => f64::from(u8::from(*b)),
            _ => {
                return Err(Failure(
                    RwStatus::InvalidParameter,
                    format!("unknown medium parameter `{key}`"),
                ))
            }
        };
        Ok(())
    })
}

/// Releases a medium. Null is ignored.
///
/// # Safety
/// `medium` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rw_medium_free(medium: *mut RwMedium) {
    if !medium.is_null() {
        drop(Box::from_raw(medium));
    }
}

/// Susceptibility at probe detuning `delta_p` (rad/s), thermally averaged
/// when the medium has Doppler broadening enabled.
///
/// # Safety
/// `medium` must be a live handle; `re` and `im` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rw_susceptibility(
    medium: *const RwMedium,
    delta_p: f64,
    re: *mut f64,
    im: *mut f64,
) -> RwStatus {
    guard(|| {
        let m = handle(medium, "medium")?;
        let (re, im) = (out_arg(re, "re")?, out_arg(im, "im")?);
        let chi = susceptibility(&m.params, delta_p)?;
        *re = chi.re;
        *im = chi.im;
        Ok(())
    })
}

/// Phase and log-amplitude picked up in one pass of the medium at probe
/// detuning `delta_p` (rad/s).
///
/// # Safety
/// `medium` must be a live handle; `delta_phi` and `delta_beta` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rw_phase_absorption(
    medium: *const RwMedium,
    delta_p: f64,
    delta_phi: *mut f64,
    delta_beta: *mut f64,
) -> RwStatus {
    guard(|| {
        let m = handle(medium, "medium")?;
        let (dphi, dbeta) = (
            out_arg(delta_phi, "delta_phi")?,
            out_arg(delta_beta, "delta_beta")?,
        );
        let pair = phase_and_absorption(susceptibility(&m.params, delta_p)?, &m.params);
        *dphi = pair.delta_phi;
        *dbeta = pair.delta_beta;
        Ok(())
    })
}

/// Exact pointer readout for pre-selection `(delta_phi, delta_beta)`,
/// post-selection angle `angle` (rad), kick `k` (rad/m) and width `w` (m).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rw_pointer_readout(
    delta_phi: f64,
    delta_beta: f64,
    angle: f64,
    k: f64,
    w: f64,
    out: *mut RwPointerReadout,
) -> RwStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let r = closed_form_readout(
            &PreSelection::new(delta_phi, delta_beta),
            &PostSelection { angle },
            &WeakCoupling { k },
            w,
        )?;
        *out = RwPointerReadout {
            centroid: r.centroid,
            eta: r.eta,
            p_post: r.p_post,
        };
        Ok(())
    })
}

/// Weak value of the which-path operator.
///
/// # Safety
/// `re` and `im` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rw_weak_value(
    delta_phi: f64,
    delta_beta: f64,
    angle: f64,
    re: *mut f64,
    im: *mut f64,
) -> RwStatus {
    guard(|| {
        let (re, im) = (out_arg(re, "re")?, out_arg(im, "im")?);
        let v = weak_value(
            &PreSelection::new(delta_phi, delta_beta),
            &PostSelection { angle },
        )?;
        *re = v.re;
        *im = v.im;
        Ok(())
    })
}

/// Atomic projection-noise limit `1/(T √N)`, Hz.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rw_atomic_shot_noise(
    t_meas: f64,
    n_atoms: f64,
    out: *mut f64,
) -> RwStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = atomic_shot_noise(t_meas, n_atoms)?;
        Ok(())
    })
}

/// Photon shot-noise phase limit `1/√N`, rad.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rw_photon_shot_noise(n_photons: f64, out: *mut f64) -> RwStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = photon_shot_noise(n_photons)?;
        Ok(())
    })
}

/// Loads and validates an experiment config file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rw_config_load(path: *const c_char, out: *mut *mut RwConfig) -> RwStatus {
    guard(|| {
        let path = PathBuf::from(str_arg(path, "path")?);
        let out = out_arg(out, "out")?;
        let config = load_config(&path)?;
        *out = Box::into_raw(Box::new(RwConfig { config }));
        Ok(())
    })
}

/// Parses and validates an experiment config from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rw_config_parse(json: *const c_char, out: *mut *mut RwConfig) -> RwStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let out = out_arg(out, "out")?;
        let config = parse_config(text)?;
        *out = Box::into_raw(Box::new(RwConfig { config }));
        Ok(())
    })
}

/// Overrides the output directory.
///
/// # Safety
/// `config` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rw_config_set_output_dir(
    config: *mut RwConfig,
    dir: *const c_char,
) -> RwStatus {
    guard(|| {
        let c = out_arg(config, "config")?;
        c.config.output_dir = PathBuf::from(str_arg(dir, "dir")?);
        Ok(())
    })
}

/// Overrides the random seed.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rw_config_set_seed(config: *mut RwConfig, seed: u64) -> RwStatus {
    guard(|| {
        out_arg(config, "config")?.config.seed = seed;
        Ok(())
    })
}

/// Runs the experiment, writing its files and manifest into the config's
/// output directory.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rw_run(config: *const RwConfig) -> RwStatus {
    guard(|| {
        let c = handle(config, "config")?;
        rydweak::runner::run(&c.config)?;
        Ok(())
    })
}

/// Releases a config. Null is ignored.
///
/// # Safety
/// `config` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rw_config_free(config: *mut RwConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}
