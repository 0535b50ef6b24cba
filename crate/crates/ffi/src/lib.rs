//! C interface to the sampler, the min-norm solver and the front metrics.
//!
//! Every function returns a [`ProudStatus`]. On failure the message is kept
//! per thread and can be read with [`proud_last_error`]. Arrays are
//! row-major and caller-owned; output buffers must hold at least the stated
//! number of elements.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use proud::harness::{execute, RunConfig, RunResult};
use proud::metrics::{emd, hypervolume};
use proud::mgd::{dominates, min_norm_weights};
use proud::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProudStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Config = 4,
    Io = 5,
    DualUnbounded = 6,
    NotRun = 7,
    BufferTooSmall = 8,
    Utf8 = 9,
    Panic = 10,
}

/// Flat metric summary of a finished run. Optional values are NaN when
/// absent.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProudReport {
    pub hv: f64,
    pub hv_std_error: f64,
    pub emd: f64,
    pub mean_front_distance: f64,
    pub mean_log_likelihood: f64,
    pub pct_stationary: f64,
    pub spread: f64,
    pub n_points: usize,
    pub n_nondominated: usize,
    pub fallbacks: usize,
}

/// Opaque run handle: a parsed configuration and, after
/// [`proud_sampler_run`], its result.
pub struct ProudSampler {
    config: RunConfig,
    result: Option<RunResult>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> ProudStatus {
    match err {
        Error::DimensionMismatch { .. } => ProudStatus::DimensionMismatch,
        Error::Config { .. } | Error::Parse { .. } => ProudStatus::Config,
        Error::Io { .. } => ProudStatus::Io,
        Error::DualUnbounded { .. } => ProudStatus::DualUnbounded,
        _ => ProudStatus::InvalidArgument,
    }
}

struct Failure(ProudStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> ProudStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => ProudStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            ProudStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(ProudStatus::NullPointer, format!("{what} is null"))
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

fn rows(flat: &[f64], width: usize) -> Vec<Vec<f64>> {
    flat.chunks(width.max(1)).map(<[f64]>::to_vec).collect()
}

fn write_rows(rows: &[Vec<f64>], out: &mut [f64]) -> Result<(), Failure> {
    let need: usize = rows.iter().map(Vec::len).sum();
    if out.len() < need {
        return Err(Failure(
            ProudStatus::BufferTooSmall,
            format!("buffer holds {} values, {need} needed", out.len()),
        ));
    }
    for (dst, v) in out.chunks_mut(rows.first().map_or(1, Vec::len).max(1)).zip(rows) {
        dst.copy_from_slice(v);
    }
    Ok(())
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn proud_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn proud_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a TOML run configuration into a new handle stored in `*out`.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn proud_sampler_new(toml: *const c_char, out: *mut *mut ProudSampler) -> ProudStatus {
    guard(|| {
        if toml.is_null() {
            return Err(null("toml"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(toml)
            .to_str()
            .map_err(|e| Failure(ProudStatus::Utf8, e.to_string()))?;
        let config = RunConfig::from_toml_str(text)?;
        config.build()?;
        *out = Box::into_raw(Box::new(ProudSampler { config, result: None }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `sampler` must come from [`proud_sampler_new`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn proud_sampler_free(sampler: *mut ProudSampler) {
    if !sampler.is_null() {
        drop(Box::from_raw(sampler));
    }
}

/// Samples and scores the configured run, replacing any earlier result.
///
/// # Safety
/// `sampler` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn proud_sampler_run(sampler: *mut ProudSampler) -> ProudStatus {
    guard(|| {
        let s = sampler.as_mut().ok_or_else(|| null("sampler"))?;
        s.result = Some(execute(&s.config)?);
        Ok(())
    })
}

/// Particle count, dimension and objective count of the configured run.
///
/// # Safety
/// `sampler` must be a live handle; each output pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn proud_sampler_shape(
    sampler: *const ProudSampler,
    n_particles: *mut usize,
    dims: *mut usize,
    n_objectives: *mut usize,
) -> ProudStatus {
    guard(|| {
        let s = sampler.as_ref().ok_or_else(|| null("sampler"))?;
        let m = match &s.result {
            Some(r) => r.experiment.objectives.m(),
            None => s.config.build()?.objectives.m(),
        };
        if let Some(p) = n_particles.as_mut() {
            *p = s.config.n_particles;
        }
        if let Some(p) = dims.as_mut() {
            *p = s.config.dims;
        }
        if let Some(p) = n_objectives.as_mut() {
            *p = m;
        }
        Ok(())
    })
}

fn finished(s: &ProudSampler) -> Result<&RunResult, Failure> {
    s.result
        .as_ref()
        .ok_or_else(|| Failure(ProudStatus::NotRun, "proud_sampler_run has not succeeded".into()))
}

/// Final positions, `n_particles * dims` values.
///
/// # Safety
/// `sampler` must be a live handle and `out` writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn proud_sampler_positions(
    sampler: *const ProudSampler,
    out: *mut f64,
    len: usize,
) -> ProudStatus {
    guard(|| {
        let r = finished(sampler.as_ref().ok_or_else(|| null("sampler"))?)?;
        write_rows(r.positions(), output(out, len, "out")?)
    })
}

/// Final objective values, `n_particles * n_objectives` values.
///
/// # Safety
/// `sampler` must be a live handle and `out` writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn proud_sampler_objectives(
    sampler: *const ProudSampler,
    out: *mut f64,
    len: usize,
) -> ProudStatus {
    guard(|| {
        let r = finished(sampler.as_ref().ok_or_else(|| null("sampler"))?)?;
        write_rows(r.objective_values(), output(out, len, "out")?)
    })
}

/// # Safety
/// `sampler` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn proud_sampler_report(sampler: *const ProudSampler, out: *mut ProudReport) -> ProudStatus {
    guard(|| {
        let r = finished(sampler.as_ref().ok_or_else(|| null("sampler"))?)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let rep = &r.report;
        *out = ProudReport {
            hv: rep.hv,
            hv_std_error: rep.hv_std_error,
            emd: rep.emd.unwrap_or(f64::NAN),
            mean_front_distance: rep.mean_front_distance.unwrap_or(f64::NAN),
            mean_log_likelihood: rep.mean_log_likelihood,
            pct_stationary: rep.pct_stationary,
            spread: rep.spread,
            n_points: rep.n_points,
            n_nondominated: rep.n_nondominated,
            fallbacks: r.output.total_fallbacks(),
        };
        Ok(())
    })
}

/// Minimum-norm convex combination of `m` gradients of length `d`.
/// `weights` receives `m` values and `direction` `d` values; `norm` may be
/// null.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn proud_min_norm(
    gradients: *const f64,
    m: usize,
    d: usize,
    weights: *mut f64,
    direction: *mut f64,
    norm: *mut f64,
) -> ProudStatus {
    guard(|| {
        if m == 0 || d == 0 {
            return Err(Failure(ProudStatus::InvalidArgument, "m and d must be positive".into()));
        }
        let g = rows(input(gradients, m * d, "gradients")?, d);
        let sol = min_norm_weights(&g)?;
        output(weights, m, "weights")?.copy_from_slice(&sol.weights);
        output(direction, d, "direction")?.copy_from_slice(&sol.direction);
        if let Some(n) = norm.as_mut() {
            *n = sol.norm;
        }
        Ok(())
    })
}

/// Hypervolume of `n` points with `m` objectives against `reference`.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn proud_hypervolume(
    points: *const f64,
    n: usize,
    m: usize,
    reference: *const f64,
    out: *mut f64,
) -> ProudStatus {
    guard(|| {
        if m == 0 {
            return Err(Failure(ProudStatus::InvalidArgument, "m must be positive".into()));
        }
        let pts = rows(input(points, n * m, "points")?, m);
        let r = input(reference, m, "reference")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = hypervolume(&pts, r)?;
        Ok(())
    })
}

/// Mean matched Euclidean cost between two sets of `n` points in `R^m`.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn proud_emd(
    a: *const f64,
    b: *const f64,
    n: usize,
    m: usize,
    out: *mut f64,
) -> ProudStatus {
    guard(|| {
        if m == 0 {
            return Err(Failure(ProudStatus::InvalidArgument, "m must be positive".into()));
        }
        let a = rows(input(a, n * m, "a")?, m);
        let b = rows(input(b, n * m, "b")?, m);
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = emd(&a, &b)?;
        Ok(())
    })
}

/// Whether `y1` Pareto-dominates `y2` under minimization.
///
/// # Safety
/// Pointers must be valid for `m` values.
#[no_mangle]
pub unsafe extern "C" fn proud_dominates(y1: *const f64, y2: *const f64, m: usize, out: *mut bool) -> ProudStatus {
    guard(|| {
        let a = input(y1, m, "y1")?;
        let b = input(y2, m, "y2")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = dominates(a, b)?;
        Ok(())
    })
}
