//! C ABI for driving experiments from other languages.
//!
//! The surface follows the usual embedding conventions: opaque handles,
//! integer status codes, a thread-local last-error message, and explicit
//! free functions for everything the library allocates. The generated
//! header lands in `include/ipm_lab.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use ipm_lab::config::{parse_config, parse_config_str, ExperimentConfig};
use ipm_lab::error::Error;
use ipm_lab::runner::{run_experiment, RunOptions};
use ipm_lab::stats;

/// Status codes returned by every fallible entry point. `CONFIG` and
/// `NUMERICAL` match the CLI exit codes for the same failure classes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IpmLabStatus {
    Ok = 0,
    /// Malformed or inconsistent configuration.
    Config = 2,
    /// A numerical invariant broke mid-run.
    Numerical = 3,
    /// Null pointer, non-UTF-8 string, or undersized buffer.
    InvalidArgument = 4,
    /// Filesystem failure.
    Io = 5,
    /// An internal panic was caught at the boundary.
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> IpmLabStatus {
    match err {
        Error::Config { .. } => IpmLabStatus::Config,
        Error::Io { .. } => IpmLabStatus::Io,
        _ => IpmLabStatus::Numerical,
    }
}

fn report(err: Error) -> IpmLabStatus {
    set_error(&err.to_string());
    status_of(&err)
}

fn guarded(body: impl FnOnce() -> IpmLabStatus) -> IpmLabStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "internal panic".to_string());
            set_error(&message);
            IpmLabStatus::Panic
        }
    }
}

/// # Safety
/// `ptr` must be a valid nul-terminated string.
unsafe fn utf8_arg<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, IpmLabStatus> {
    if ptr.is_null() {
        set_error(&format!("{what} is null"));
        return Err(IpmLabStatus::InvalidArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(&format!("{what} is not valid UTF-8"));
        IpmLabStatus::InvalidArgument
    })
}

/// # Safety
/// `ptr` must point to `len` readable doubles (or be non-null with len 0).
unsafe fn slice_arg<'a>(
    ptr: *const f64,
    len: usize,
    what: &str,
) -> Result<&'a [f64], IpmLabStatus> {
    if ptr.is_null() {
        set_error(&format!("{what} is null"));
        return Err(IpmLabStatus::InvalidArgument);
    }
    if len == 0 {
        set_error(&format!("{what} is empty"));
        return Err(IpmLabStatus::InvalidArgument);
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// Opaque handle to a parsed, validated experiment configuration.
pub struct IpmLabConfig {
    inner: ExperimentConfig,
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn ipm_lab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent error on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ipm_lab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Parses and validates a config file. On success stores a handle in
/// `out_config`; free it with `ipm_lab_config_free`.
///
/// # Safety
/// `path` must be a valid nul-terminated string and `out_config` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn ipm_lab_config_load(
    path: *const c_char,
    out_config: *mut *mut IpmLabConfig,
) -> IpmLabStatus {
    guarded(|| {
        if out_config.is_null() {
            set_error("out_config is null");
            return IpmLabStatus::InvalidArgument;
        }
        let path = match utf8_arg(path, "path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        match parse_config(std::path::Path::new(path)) {
            Ok(inner) => {
                *out_config = Box::into_raw(Box::new(IpmLabConfig { inner }));
                IpmLabStatus::Ok
            }
            Err(err) => report(err),
        }
    })
}

/// Parses and validates config text (TOML). Same contract as
/// `ipm_lab_config_load`.
///
/// # Safety
/// `text` must be a valid nul-terminated string and `out_config` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn ipm_lab_config_parse(
    text: *const c_char,
    out_config: *mut *mut IpmLabConfig,
) -> IpmLabStatus {
    guarded(|| {
        if out_config.is_null() {
            set_error("out_config is null");
            return IpmLabStatus::InvalidArgument;
        }
        let text = match utf8_arg(text, "text") {
            Ok(t) => t,
            Err(status) => return status,
        };
        match parse_config_str(text) {
            Ok(inner) => {
                *out_config = Box::into_raw(Box::new(IpmLabConfig { inner }));
                IpmLabStatus::Ok
            }
            Err(err) => report(err),
        }
    })
}

/// Frees a config handle. Null is a no-op.
///
/// # Safety
/// `config` must come from a load/parse call and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ipm_lab_config_free(config: *mut IpmLabConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Writes the canonical config hash (64 hex characters plus NUL) into the
/// caller's buffer; `buffer_len` must be at least 65.
///
/// # Safety
/// `config` must be a live handle; `buffer` must point to `buffer_len`
/// writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ipm_lab_config_hash(
    config: *const IpmLabConfig,
    buffer: *mut c_char,
    buffer_len: usize,
) -> IpmLabStatus {
    guarded(|| {
        if config.is_null() || buffer.is_null() {
            set_error("config or buffer is null");
            return IpmLabStatus::InvalidArgument;
        }
        let hash = (*config).inner.hash();
        if buffer_len < hash.len() + 1 {
            set_error("buffer too small for the config hash");
            return IpmLabStatus::InvalidArgument;
        }
        std::ptr::copy_nonoverlapping(hash.as_ptr() as *const c_char, buffer, hash.len());
        *buffer.add(hash.len()) = 0;
        IpmLabStatus::Ok
    })
}

/// Runs the experiment described by the handle.
///
/// `out_dir` overrides the config's output directory when non-null; `jobs`
/// caps worker threads (0 uses all cores; results do not depend on it);
/// `seed_override` replaces the master seed when non-null. On success
/// `manifest_json_out`, when non-null, receives the run manifest as a JSON
/// string to be released with `ipm_lab_string_free`.
///
/// # Safety
/// Pointer arguments must be valid as described above.
#[no_mangle]
pub unsafe extern "C" fn ipm_lab_run(
    config: *const IpmLabConfig,
    out_dir: *const c_char,
    jobs: usize,
    seed_override: *const u64,
    manifest_json_out: *mut *mut c_char,
) -> IpmLabStatus {
    guarded(|| {
        if config.is_null() {
            set_error("config is null");
            return IpmLabStatus::InvalidArgument;
        }
        let out_dir_path = if out_dir.is_null() {
            None
        } else {
            match utf8_arg(out_dir, "out_dir") {
                Ok(p) => Some(PathBuf::from(p)),
                Err(status) => return status,
            }
        };
        let options = RunOptions {
            out_dir: out_dir_path,
            jobs: (jobs > 0).then_some(jobs),
            seed_override: (!seed_override.is_null()).then(|| *seed_override),
        };
        match run_experiment(&(*config).inner, &options) {
            Ok(manifest) => {
                if !manifest_json_out.is_null() {
                    let json = serde_json::to_string(&manifest).expect("manifest serializes");
                    let owned = CString::new(json).expect("no interior NUL");
                    *manifest_json_out = owned.into_raw();
                }
                IpmLabStatus::Ok
            }
            Err(err) => report(err),
        }
    })
}

/// Frees a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ipm_lab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Two-sample Kolmogorov-Smirnov statistic of two double arrays.
///
/// # Safety
/// `a`/`b` must point to `a_len`/`b_len` readable doubles; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ipm_lab_ks_statistic(
    a: *const f64,
    a_len: usize,
    b: *const f64,
    b_len: usize,
    out: *mut f64,
) -> IpmLabStatus {
    guarded(|| {
        if out.is_null() {
            set_error("out is null");
            return IpmLabStatus::InvalidArgument;
        }
        let (a, b) = match (slice_arg(a, a_len, "a"), slice_arg(b, b_len, "b")) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(status), _) | (_, Err(status)) => return status,
        };
        if a.iter().chain(b).any(|v| !v.is_finite()) {
            set_error("samples must be finite");
            return IpmLabStatus::Numerical;
        }
        *out = stats::ks_statistic(a, b);
        IpmLabStatus::Ok
    })
}

/// Histogram total-variation distance over `bins` interior cells on
/// `[lo, hi)` plus out-of-range sentinels.
///
/// # Safety
/// Same pointer contract as `ipm_lab_ks_statistic`.
#[no_mangle]
pub unsafe extern "C" fn ipm_lab_tv_histogram_distance(
    a: *const f64,
    a_len: usize,
    b: *const f64,
    b_len: usize,
    lo: f64,
    hi: f64,
    bins: usize,
    out: *mut f64,
) -> IpmLabStatus {
    guarded(|| {
        if out.is_null() {
            set_error("out is null");
            return IpmLabStatus::InvalidArgument;
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) || bins < 2 {
            set_error("need finite lo < hi and bins >= 2");
            return IpmLabStatus::InvalidArgument;
        }
        let (a, b) = match (slice_arg(a, a_len, "a"), slice_arg(b, b_len, "b")) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(status), _) | (_, Err(status)) => return status,
        };
        if a.iter().chain(b).any(|v| !v.is_finite()) {
            set_error("samples must be finite");
            return IpmLabStatus::Numerical;
        }
        *out = stats::tv_histogram_distance(a, b, lo, hi, bins);
        IpmLabStatus::Ok
    })
}

/// Energy distance of two double arrays.
///
/// # Safety
/// Same pointer contract as `ipm_lab_ks_statistic`.
#[no_mangle]
pub unsafe extern "C" fn ipm_lab_energy_distance(
    a: *const f64,
    a_len: usize,
    b: *const f64,
    b_len: usize,
    out: *mut f64,
) -> IpmLabStatus {
    guarded(|| {
        if out.is_null() {
            set_error("out is null");
            return IpmLabStatus::InvalidArgument;
        }
        let (a, b) = match (slice_arg(a, a_len, "a"), slice_arg(b, b_len, "b")) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(status), _) | (_, Err(status)) => return status,
        };
        if a.iter().chain(b).any(|v| !v.is_finite()) {
            set_error("samples must be finite");
            return IpmLabStatus::Numerical;
        }
        *out = stats::energy_distance(a, b);
        IpmLabStatus::Ok
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONFIG: &str = r#"
kind = "ipm"
seed = 31

[objective]
name = "constant"
value = 1.0
g_min = 1.0
g_max = 1.0
domain_lo = [-6.0]
domain_hi = [6.0]

[kernel]
name = "gaussian"
sigma = 0.5

[stack]
ops = ["mutation"]

[init]
name = "gaussian"
mean = [0.0]
sd = 1.0

[run]
generations = 1
grid_bins = 64
"#;

    fn cstr(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    #[test]
    fn parse_hash_run_and_free() {
        let dir = tempfile::tempdir().unwrap();
        let text = cstr(CONFIG);
        let mut handle: *mut IpmLabConfig = std::ptr::null_mut();
        unsafe {
            assert_eq!(
                ipm_lab_config_parse(text.as_ptr(), &mut handle),
                IpmLabStatus::Ok
            );
            assert!(!handle.is_null());

            let mut buffer = [0 as c_char; 65];
            assert_eq!(
                ipm_lab_config_hash(handle, buffer.as_mut_ptr(), buffer.len()),
                IpmLabStatus::Ok
            );
            let hash = CStr::from_ptr(buffer.as_ptr()).to_str().unwrap();
            assert_eq!(hash.len(), 64);

            let out_dir = cstr(dir.path().to_str().unwrap());
            let mut manifest: *mut c_char = std::ptr::null_mut();
            assert_eq!(
                ipm_lab_run(handle, out_dir.as_ptr(), 2, std::ptr::null(), &mut manifest),
                IpmLabStatus::Ok
            );
            let json = CStr::from_ptr(manifest).to_str().unwrap();
            assert!(json.contains("\"config_hash\""));
            assert!(json.contains(hash));
            ipm_lab_string_free(manifest);
            ipm_lab_config_free(handle);
        }
        assert!(dir.path().join("trajectory.csv").exists());
        assert!(dir.path().join("manifest.json").exists());
    }

    #[test]
    fn config_errors_surface_with_message() {
        let text = cstr(&CONFIG.replace("\"gaussian\"", "\"cauchy\""));
        let mut handle: *mut IpmLabConfig = std::ptr::null_mut();
        unsafe {
            assert_eq!(
                ipm_lab_config_parse(text.as_ptr(), &mut handle),
                IpmLabStatus::Config
            );
            let message = CStr::from_ptr(ipm_lab_last_error_message())
                .to_str()
                .unwrap();
            assert!(message.contains("kernel.name"), "{message}");
        }
    }

    #[test]
    fn missing_file_reports_io() {
        let path = cstr("/definitely/not/here.toml");
        let mut handle: *mut IpmLabConfig = std::ptr::null_mut();
        unsafe {
            assert_eq!(
                ipm_lab_config_load(path.as_ptr(), &mut handle),
                IpmLabStatus::Io
            );
        }
    }

    #[test]
    fn distance_helpers_match_library_values() {
        let a = [1.0f64, 2.0, 3.0, 4.0];
        let b = [3.0f64, 4.0, 5.0, 6.0];
        let mut value = 0.0f64;
        unsafe {
            assert_eq!(
                ipm_lab_ks_statistic(a.as_ptr(), a.len(), b.as_ptr(), b.len(), &mut value),
                IpmLabStatus::Ok
            );
            assert_eq!(value, stats::ks_statistic(&a, &b));

            assert_eq!(
                ipm_lab_tv_histogram_distance(
                    a.as_ptr(),
                    a.len(),
                    b.as_ptr(),
                    b.len(),
                    0.0,
                    8.0,
                    8,
                    &mut value
                ),
                IpmLabStatus::Ok
            );
            assert_eq!(value, stats::tv_histogram_distance(&a, &b, 0.0, 8.0, 8));

            assert_eq!(
                ipm_lab_energy_distance(a.as_ptr(), a.len(), b.as_ptr(), b.len(), &mut value),
                IpmLabStatus::Ok
            );
            assert_eq!(value, stats::energy_distance(&a, &b));
        }
    }

    #[test]
    fn invalid_arguments_are_rejected_without_crashing() {
        let a = [1.0f64, f64::NAN];
        let b = [0.5f64];
        let mut value = 0.0f64;
        unsafe {
            assert_eq!(
                ipm_lab_ks_statistic(std::ptr::null(), 0, b.as_ptr(), b.len(), &mut value),
                IpmLabStatus::InvalidArgument
            );
            assert_eq!(
                ipm_lab_ks_statistic(a.as_ptr(), a.len(), b.as_ptr(), b.len(), &mut value),
                IpmLabStatus::Numerical
            );
            assert_eq!(
                ipm_lab_config_parse(std::ptr::null(), std::ptr::null_mut()),
                IpmLabStatus::InvalidArgument
            );
        }
    }

    #[test]
    fn version_is_a_static_string() {
        unsafe {
            let version = CStr::from_ptr(ipm_lab_version()).to_str().unwrap();
            assert_eq!(version, env!("CARGO_PKG_VERSION"));
        }
    }
}
