//! C ABI over the dplab protocols.
//!
//! Every fallible call returns a [`DplabStatus`]; on failure the message is
//! kept per thread and read back with [`dplab_last_error`]. Handles are opaque
//! and owned by the caller until passed to their `_free` function. Strings
//! returned through `char **` must be released with [`dplab_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use dplab::barrier::{capacity, BarrierSpec, CapacityOptions, CapacityVerdict};
use dplab::grid::{Field, Grid, Topology};
use dplab::harness::{classify_prefix, run_protocol, ClassifierMode, FormulaPrefix, ProtocolConfig, StabilityReport, Verdict};
use dplab::tv::{solve_tv, InverseProblem, SolverOptions};
use dplab::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DplabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Quorum = 3,
    SolverFailure = 4,
    CalibrationFailure = 5,
    Inconclusive = 6,
    EvolutionBlowup = 7,
    InadmissibleDatum = 8,
    NoTameContinuation = 9,
    Parse = 10,
    Io = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DplabVerdict {
    Decaying = 0,
    Plateau = 1,
    Inconclusive = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DplabClassifierMode {
    Strict = 0,
    AsWritten = 1,
}

/// A validated protocol configuration.
pub struct DplabConfig(ProtocolConfig);

/// A finished stability report.
pub struct DplabReport(StabilityReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> DplabStatus {
    match e {
        Error::InvalidArgument(_) | Error::Format(_) | Error::NoAdmissibleLambda => DplabStatus::InvalidArgument,
        Error::Quorum { .. } => DplabStatus::Quorum,
        Error::SolverFailure { .. } => DplabStatus::SolverFailure,
        Error::CalibrationFailure(_) => DplabStatus::CalibrationFailure,
        Error::InconclusiveVerdict(_) => DplabStatus::Inconclusive,
        Error::EvolutionBlowup { .. } => DplabStatus::EvolutionBlowup,
        Error::InadmissibleDatum { .. } => DplabStatus::InadmissibleDatum,
        Error::NoTameContinuation => DplabStatus::NoTameContinuation,
        Error::Parse { .. } => DplabStatus::Parse,
        Error::Io(_) => DplabStatus::Io,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DplabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            DplabStatus::Ok
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            DplabStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            DplabStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Lib(Error::InvalidArgument(format!("{what} is not valid UTF-8"))))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).unwrap().into_raw()
}

fn verdict_of(v: Verdict) -> DplabVerdict {
    match v {
        Verdict::Decaying => DplabVerdict::Decaying,
        Verdict::Plateau => DplabVerdict::Plateau,
        Verdict::Inconclusive => DplabVerdict::Inconclusive,
    }
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn dplab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dplab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and validates a TOML protocol configuration.
///
/// # Safety
/// `toml` must be a NUL-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dplab_config_from_toml(toml: *const c_char, out: *mut *mut DplabConfig) -> DplabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let cfg = ProtocolConfig::from_toml(str_arg(toml, "toml")?)?;
        *out = Box::into_raw(Box::new(DplabConfig(cfg)));
        Ok(())
    })
}

/// # Safety
/// `cfg` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dplab_config_free(cfg: *mut DplabConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn dplab_config_set_seed(cfg: *mut DplabConfig, seed: u64) -> DplabStatus {
    guard(|| {
        let cfg = out_arg(cfg, "cfg")?;
        cfg.0.seed = seed;
        Ok(())
    })
}

/// SHA-256 of the canonical configuration, as lowercase hex.
///
/// # Safety
/// `cfg` must be a live config handle, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dplab_config_hash(cfg: *const DplabConfig, out: *mut *mut c_char) -> DplabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = owned_string(ref_arg(cfg, "cfg")?.0.hash());
        Ok(())
    })
}

/// Runs the configured protocol over its whole ensemble.
///
/// # Safety
/// `cfg` must be a live config handle, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dplab_run(cfg: *const DplabConfig, out: *mut *mut DplabReport) -> DplabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let report = run_protocol(&ref_arg(cfg, "cfg")?.0)?;
        *out = Box::into_raw(Box::new(DplabReport(report)));
        Ok(())
    })
}

/// # Safety
/// `report` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dplab_report_free(report: *mut DplabReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `report` must be a live report handle, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dplab_report_json(report: *const DplabReport, out: *mut *mut c_char) -> DplabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = owned_string(ref_arg(report, "report")?.0.to_json());
        Ok(())
    })
}

/// # Safety
/// `report` must be a live report handle, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dplab_report_verdict(report: *const DplabReport, out: *mut DplabVerdict) -> DplabStatus {
    guard(|| {
        *out_arg(out, "out")? = verdict_of(ref_arg(report, "report")?.0.verdict);
        Ok(())
    })
}

/// Borrowed view of SSI(n); valid while the report lives.
///
/// # Safety
/// `report` must be a live report handle, `data` and `len` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn dplab_report_ssi(
    report: *const DplabReport,
    data: *mut *const f64,
    len: *mut usize,
) -> DplabStatus {
    guard(|| {
        let r = ref_arg(report, "report")?;
        *out_arg(data, "data")? = r.0.ssi.as_ptr();
        *out_arg(len, "len")? = r.0.ssi.len();
        Ok(())
    })
}

/// Borrowed view of SC(n); valid while the report lives.
///
/// # Safety
/// `report` must be a live report handle, `data` and `len` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn dplab_report_sc(
    report: *const DplabReport,
    data: *mut *const f64,
    len: *mut usize,
) -> DplabStatus {
    guard(|| {
        let r = ref_arg(report, "report")?;
        *out_arg(data, "data")? = r.0.sc.as_ptr();
        *out_arg(len, "len")? = r.0.sc.len();
        Ok(())
    })
}

/// # Safety
/// `report` must be a live report handle, `survivors` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dplab_report_survivors(report: *const DplabReport, survivors: *mut usize) -> DplabStatus {
    guard(|| {
        *out_arg(survivors, "survivors")? = ref_arg(report, "report")?.0.survivors;
        Ok(())
    })
}

/// Writes report.json, ssi.csv, sc.csv and metadata.json into `dir`.
///
/// # Safety
/// `report` must be a live report handle, `dir` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn dplab_report_write(report: *const DplabReport, dir: *const c_char) -> DplabStatus {
    guard(|| {
        let r = ref_arg(report, "report")?;
        r.0.write(Path::new(str_arg(dir, "dir")?))?;
        Ok(())
    })
}

/// Pointclass of a quantifier prefix, e.g. `Pi^1_2` (ascii) or `Π¹₂`.
///
/// # Safety
/// `prefix` must be a NUL-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dplab_classify(
    prefix: *const c_char,
    mode: DplabClassifierMode,
    ascii: bool,
    out: *mut *mut c_char,
) -> DplabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let f = FormulaPrefix::parse(str_arg(prefix, "prefix")?)?;
        let mode = match mode {
            DplabClassifierMode::Strict => ClassifierMode::Strict,
            DplabClassifierMode::AsWritten => ClassifierMode::AsWritten,
        };
        let c = classify_prefix(&f, mode);
        *out = owned_string(if ascii { c.ascii() } else { c.to_string() });
        Ok(())
    })
}

unsafe fn plane<'a>(data: *const f64, rows: usize, cols: usize) -> Result<(Grid, &'a [f64]), Fail> {
    if data.is_null() {
        return Err(Fail::Null("data"));
    }
    let n = rows.checked_mul(cols).filter(|&n| n > 0);
    let Some(n) = n else {
        return Err(Error::InvalidArgument("empty or oversized plane".into()).into());
    };
    let grid = Grid::unit(&[rows, cols], Topology::Free)?;
    Ok((grid, std::slice::from_raw_parts(data, n)))
}

/// TV denoising of a row-major `rows x cols` image on the unit square at a
/// fixed `lambda`; writes the minimiser to `out` (same shape) and the final
/// optimality residual to `residual` (may be NULL).
///
/// # Safety
/// `data` and `out` must hold `rows * cols` doubles.
#[no_mangle]
pub unsafe extern "C" fn dplab_tv_denoise(
    data: *const f64,
    rows: usize,
    cols: usize,
    lambda: f64,
    tol: f64,
    out: *mut f64,
    residual: *mut f64,
) -> DplabStatus {
    guard(|| {
        let (grid, values) = plane(data, rows, cols)?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let p = InverseProblem::denoising(Field::new(grid, values.to_vec())?, 0.0)?;
        let sol = solve_tv(&p, lambda, &SolverOptions::default().with_tol(tol))?;
        std::slice::from_raw_parts_mut(out, values.len()).copy_from_slice(sol.u.values());
        if let Some(r) = residual.as_mut() {
            *r = sol.residual;
        }
        Ok(())
    })
}

/// Capacity energies of the barrier `{data >= theta}` on the default ladder
/// (8, 32, 128 nodes per unit). `energies` must hold 3 doubles; `verdict`
/// receives 0 zero, 1 positive, 2 inconclusive.
///
/// # Safety
/// `data` must hold `rows * cols` doubles, `energies` 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn dplab_capacity(
    data: *const f64,
    rows: usize,
    cols: usize,
    theta: f64,
    energies: *mut f64,
    verdict: *mut i32,
) -> DplabStatus {
    guard(|| {
        let (grid, values) = plane(data, rows, cols)?;
        let env = Field::new(grid, values.to_vec())?;
        let est = capacity(&BarrierSpec::new(env, theta), &CapacityOptions::default())?;
        if energies.is_null() {
            return Err(Fail::Null("energies"));
        }
        let e = est.energies();
        std::slice::from_raw_parts_mut(energies, e.len()).copy_from_slice(&e);
        *out_arg(verdict, "verdict")? = match est.verdict {
            CapacityVerdict::Zero => 0,
            CapacityVerdict::Positive => 1,
            CapacityVerdict::Inconclusive => 2,
        };
        Ok(())
    })
}
