//! C ABI over `mkdv-core`.
//!
//! Fields and flows are opaque heap handles created by `mkdv_*_new` functions
//! and released by the matching `*_free`. Every fallible function returns a
//! [`MkdvStatus`]; on failure a message is available from [`mkdv_last_error`]
//! on the same thread. Panics are caught at the boundary and reported as
//! `MKDV_STATUS_PANIC`.
//!
//! Coefficient arrays are ordered by frequency from `-N` to `N` and passed as
//! separate real and imaginary `double` arrays of length `2N + 1`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use mkdv_core::config::RunConfig;
use mkdv_core::dynamics::{evolve, Equation, FlowConfig};
use mkdv_core::energies::{e1, e3, e3_drift, mass, momentum};
use mkdv_core::measures::{sample_field, EnsembleSpec};
use mkdv_core::pairing::{lemma_sum, Lemma};
use mkdv_core::{experiments, Error, Sign, SpectralField};
use num_complex::Complex64;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MkdvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    CapExceeded = 3,
    Integration = 4,
    Config = 5,
    Io = 6,
    Panic = 7,
    Other = 8,
}

/// Values accepted for `sign` arguments.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MkdvSign {
    Defocusing = 0,
    Focusing = 1,
}

/// Values accepted for `equation` arguments.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MkdvEquation {
    Mkdv2 = 0,
    Mkdv = 1,
    Linear = 2,
}

/// Values accepted for `lemma` arguments.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MkdvLemma {
    L53 = 0,
    L55_14 = 1,
    L55_25 = 2,
    L58 = 3,
    Llog = 4,
}

/// Opaque truncated field.
pub struct MkdvField(SpectralField);

/// Opaque flow parameters.
pub struct MkdvFlow(FlowConfig);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(err: &Error) -> MkdvStatus {
    match err {
        Error::InvalidArgument(_) | Error::Aliasing { .. } | Error::NonUniformGrid { .. } => {
            MkdvStatus::InvalidArgument
        }
        Error::CapExceeded { .. } => MkdvStatus::CapExceeded,
        Error::StepUnderflow { .. } | Error::NonFinite { .. } => MkdvStatus::Integration,
        Error::Config(_) | Error::Json(_) => MkdvStatus::Config,
        Error::Io(_) => MkdvStatus::Io,
        _ => MkdvStatus::Other,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (MkdvStatus, String)>) -> MkdvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            MkdvStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside mkdv-core");
            MkdvStatus::Panic
        }
    }
}

fn core<T>(r: mkdv_core::Result<T>) -> Result<T, (MkdvStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn invalid(msg: impl Into<String>) -> (MkdvStatus, String) {
    (MkdvStatus::InvalidArgument, msg.into())
}

fn null(what: &str) -> (MkdvStatus, String) {
    (MkdvStatus::NullPointer, format!("{what} is null"))
}

fn sign_of(v: i32) -> Result<Sign, (MkdvStatus, String)> {
    match v {
        0 => Ok(Sign::Defocusing),
        1 => Ok(Sign::Focusing),
        _ => Err(invalid(format!("unknown sign {v}"))),
    }
}

fn equation_of(v: i32) -> Result<Equation, (MkdvStatus, String)> {
    match v {
        0 => Ok(Equation::Mkdv2),
        1 => Ok(Equation::Mkdv),
        2 => Ok(Equation::Linear),
        _ => Err(invalid(format!("unknown equation {v}"))),
    }
}

fn lemma_of(v: i32) -> Result<Lemma, (MkdvStatus, String)> {
    Lemma::ALL
        .get(usize::try_from(v).map_err(|_| invalid(format!("unknown lemma {v}")))?)
        .copied()
        .ok_or_else(|| invalid(format!("unknown lemma {v}")))
}

unsafe fn field_ref<'a>(f: *const MkdvField) -> Result<&'a SpectralField, (MkdvStatus, String)> {
    f.as_ref().map(|f| &f.0).ok_or_else(|| null("field"))
}

unsafe fn write_out<T>(out: *mut T, v: T) -> Result<(), (MkdvStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(v);
    Ok(())
}

/// Message of the last failed call on this thread (empty after a success).
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn mkdv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static description of a status code (`"unknown status"` for other values).
#[no_mangle]
pub extern "C" fn mkdv_status_name(status: i32) -> *const c_char {
    let s: &'static CStr = match status {
        0 => c"ok",
        1 => c"null pointer",
        2 => c"invalid argument",
        3 => c"enumeration cap exceeded",
        4 => c"integration failure",
        5 => c"configuration error",
        6 => c"i/o error",
        7 => c"internal panic",
        8 => c"error",
        _ => c"unknown status",
    };
    s.as_ptr()
}

/// Creates a field with band limit `n` from `2n + 1` coefficients.
///
/// # Safety
/// `re` and `im` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mkdv_field_new(
    n: usize,
    re: *const f64,
    im: *const f64,
    len: usize,
    out: *mut *mut MkdvField,
) -> MkdvStatus {
    guard(|| {
        if re.is_null() || im.is_null() {
            return Err(null("coefficient array"));
        }
        let (re, im) = (std::slice::from_raw_parts(re, len), std::slice::from_raw_parts(im, len));
        let coeffs = re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect();
        let field = core(SpectralField::from_coeffs(n, coeffs))?;
        write_out(out, Box::into_raw(Box::new(MkdvField(field))))
    })
}

/// Draws sample `index` of the Gaussian ensemble with band limit `n`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mkdv_field_sample(
    n: usize,
    seed: u64,
    index: usize,
    out: *mut *mut MkdvField,
) -> MkdvStatus {
    guard(|| {
        let spec = EnsembleSpec {
            n,
            master_seed: seed,
            count: index.saturating_add(1),
            sign: Sign::Defocusing,
            r: 1.0,
        };
        let field = core(sample_field(&spec, index))?;
        write_out(out, Box::into_raw(Box::new(MkdvField(field))))
    })
}

/// Releases a field. Null is ignored.
///
/// # Safety
/// `field` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mkdv_field_free(field: *mut MkdvField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Band limit `N` of a field, or 0 for null.
///
/// # Safety
/// `field` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn mkdv_field_max_freq(field: *const MkdvField) -> usize {
    field.as_ref().map_or(0, |f| f.0.max_freq())
}

/// Copies the `2N + 1` coefficients into `re` and `im` (each of length `len`).
///
/// # Safety
/// `field` must be valid; `re` and `im` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mkdv_field_coeffs(
    field: *const MkdvField,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> MkdvStatus {
    guard(|| {
        let f = field_ref(field)?;
        if re.is_null() || im.is_null() {
            return Err(null("coefficient array"));
        }
        if len != f.coeffs().len() {
            return Err(invalid(format!("buffer length {len}, need {}", f.coeffs().len())));
        }
        let (re, im) = (std::slice::from_raw_parts_mut(re, len), std::slice::from_raw_parts_mut(im, len));
        for (k, c) in f.coeffs().iter().enumerate() {
            re[k] = c.re;
            im[k] = c.im;
        }
        Ok(())
    })
}

/// Conserved and drifting quantities of a field.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MkdvEnergies {
    pub e1: f64,
    pub e3: f64,
    pub mass: f64,
    pub momentum: f64,
}

/// Evaluates `E_1`, `E_3` (for `sign`), mass and momentum.
///
/// # Safety
/// `field` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mkdv_field_energies(
    field: *const MkdvField,
    sign: i32,
    out: *mut MkdvEnergies,
) -> MkdvStatus {
    guard(|| {
        let f = field_ref(field)?;
        let sign = sign_of(sign)?;
        write_out(
            out,
            MkdvEnergies {
                e1: e1(f),
                e3: e3(f, sign),
                mass: mass(f),
                momentum: momentum(f),
            },
        )
    })
}

/// Time derivative of `E_3(Pi_N u)` along the truncated flow at truncation `n`.
///
/// # Safety
/// `field` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mkdv_e3_drift(field: *const MkdvField, n: usize, out: *mut f64) -> MkdvStatus {
    guard(|| {
        let f = field_ref(field)?;
        if n == 0 {
            return Err(invalid("truncation must be >= 1"));
        }
        write_out(out, e3_drift(f, n))
    })
}

/// Creates flow parameters for truncation `n`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mkdv_flow_new(
    n: usize,
    sign: i32,
    equation: i32,
    dt: f64,
    tol: f64,
    out: *mut *mut MkdvFlow,
) -> MkdvStatus {
    guard(|| {
        let cfg = FlowConfig {
            n,
            sign: sign_of(sign)?,
            equation: equation_of(equation)?,
            dt,
            tol,
            t_final: 0.0,
        };
        core(cfg.validate())?;
        write_out(out, Box::into_raw(Box::new(MkdvFlow(cfg))))
    })
}

/// Releases flow parameters. Null is ignored.
///
/// # Safety
/// `flow` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mkdv_flow_free(flow: *mut MkdvFlow) {
    if !flow.is_null() {
        drop(Box::from_raw(flow));
    }
}

/// Evolves `field` to time `t` (negative allowed) and returns a new field.
///
/// # Safety
/// `flow` and `field` must be valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mkdv_evolve(
    flow: *const MkdvFlow,
    field: *const MkdvField,
    t: f64,
    out: *mut *mut MkdvField,
) -> MkdvStatus {
    guard(|| {
        let cfg = flow.as_ref().ok_or_else(|| null("flow"))?.0;
        let f = field_ref(field)?;
        let end = core(evolve(f, &cfg, t))?;
        write_out(out, Box::into_raw(Box::new(MkdvField(end))))
    })
}

/// Closed-form lemma sum at truncation `n`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mkdv_lemma_sum(lemma: i32, n: usize, out: *mut f64) -> MkdvStatus {
    guard(|| {
        let l = lemma_of(lemma)?;
        write_out(out, core(lemma_sum(l, n))?)
    })
}

/// Runs an experiment from JSON text, writing outputs under `out_root`
/// (null: the config's `output_dir`, then `$MKDV_LAB_OUT`, then `./runs`).
/// `passed` receives 1 when every check passed, else 0.
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out_root` null or
/// NUL-terminated; `passed` writable.
#[no_mangle]
pub unsafe extern "C" fn mkdv_run_json(
    config_json: *const c_char,
    out_root: *const c_char,
    passed: *mut i32,
) -> MkdvStatus {
    guard(|| {
        if config_json.is_null() {
            return Err(null("config"));
        }
        let text = CStr::from_ptr(config_json)
            .to_str()
            .map_err(|_| (MkdvStatus::Config, "config is not UTF-8".to_string()))?;
        let cfg = core(RunConfig::from_json(text))?;
        let flag = if out_root.is_null() {
            None
        } else {
            Some(PathBuf::from(
                CStr::from_ptr(out_root)
                    .to_str()
                    .map_err(|_| invalid("output root is not UTF-8"))?,
            ))
        };
        let root = cfg.output_root(flag.as_deref());
        let run = core(experiments::run(&cfg, &root))?;
        write_out(passed, i32::from(run.outcome.result.passed()))
    })
}
