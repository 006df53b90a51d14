//! C ABI over `cbm-core`.
//!
//! Objects cross the boundary as opaque heap handles created by a `*_new` or
//! `*_generate` function and released with the matching `*_free`. Every
//! fallible call returns a [`CbmStatus`] and writes its result through an
//! out-pointer; on failure a message is available from [`cbm_last_error`]
//! on the same thread. Panics never unwind into C.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use cbm_core::model::Posterior;
use cbm_core::replica::{sup_h_rs, RsParams};
use cbm_core::{Error, Gf2System, Instance, ModelParams};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CbmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfRange = 3,
    EnumerationCap = 4,
    NotGaugeFixed = 5,
    Internal = 6,
    Panic = 7,
}

/// A generated or parsed instance together with its posterior.
pub struct CbmInstance {
    instance: Instance,
    posterior: Posterior,
}

/// An incrementally built GF(2) row space.
pub struct CbmGf2 {
    system: Gf2System,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> CbmStatus {
    match err {
        Error::InvalidParameter { .. } => CbmStatus::InvalidArgument,
        Error::IndexOutOfRange { .. } => CbmStatus::OutOfRange,
        Error::EnumerationCap { .. } => CbmStatus::EnumerationCap,
        Error::NotGaugeFixed => CbmStatus::NotGaugeFixed,
        _ => CbmStatus::Internal,
    }
}

struct Failure(CbmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(CbmStatus::NullPointer, format!("`{what}` is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> CbmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CbmStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal panic: {msg}"));
            CbmStatus::Panic
        }
    }
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn support<'a>(ptr: *const usize, len: usize) -> Result<&'a [usize], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null("support"));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

unsafe fn instance<'a>(ptr: *const CbmInstance) -> Result<&'a CbmInstance, Failure> {
    ptr.as_ref().ok_or_else(|| null("instance"))
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cbm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cbm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn wrap(instance: Instance) -> Result<*mut CbmInstance, Failure> {
    let posterior = instance.posterior()?;
    Ok(Box::into_raw(Box::new(CbmInstance { instance, posterior })))
}

/// Draws a gauge-fixed instance with `Poi(alpha n)` factors of size `k`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn cbm_instance_generate(
    n: usize,
    k: usize,
    alpha: f64,
    q: f64,
    seed: u64,
    out: *mut *mut CbmInstance,
) -> CbmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let params = ModelParams::new(n, k, alpha, q)?;
        write(out, wrap(Instance::generate(params, seed)?)?, "out")
    })
}

/// Parses an instance from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cbm_instance_from_json(json: *const c_char, out: *mut *mut CbmInstance) -> CbmStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Failure(CbmStatus::InvalidArgument, format!("json is not UTF-8: {e}")))?;
        let inst = Instance::from_json(text).map_err(|e| match e {
            Error::Json(_) => Failure(CbmStatus::InvalidArgument, e.to_string()),
            other => other.into(),
        })?;
        write(out, wrap(inst)?, "out")
    })
}

/// Releases an instance. Null is ignored.
///
/// # Safety
/// `inst` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cbm_instance_free(inst: *mut CbmInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// # Safety
/// `inst` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cbm_instance_num_vars(inst: *const CbmInstance, out: *mut usize) -> CbmStatus {
    guard(|| write(out, instance(inst)?.instance.n(), "out"))
}

/// # Safety
/// `inst` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cbm_instance_num_factors(inst: *const CbmInstance, out: *mut usize) -> CbmStatus {
    guard(|| write(out, instance(inst)?.instance.factors.len(), "out"))
}

/// Rank of the revealed parity rows.
///
/// # Safety
/// `inst` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cbm_instance_rank(inst: *const CbmInstance, out: *mut usize) -> CbmStatus {
    guard(|| write(out, instance(inst)?.posterior.system().rank(), "out"))
}

/// `(1/n) ln Z` in nats.
///
/// # Safety
/// `inst` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cbm_instance_free_entropy(inst: *const CbmInstance, out: *mut f64) -> CbmStatus {
    guard(|| write(out, instance(inst)?.posterior.free_entropy(), "out"))
}

/// Fraction of variables fixed by the constraints.
///
/// # Safety
/// `inst` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cbm_instance_mean_overlap(inst: *const CbmInstance, out: *mut f64) -> CbmStatus {
    guard(|| write(out, instance(inst)?.posterior.mean_overlap(), "out"))
}

/// `⟨σ_S⟩ ∈ {0, 1}` for the index set `support[0..len]`.
///
/// # Safety
/// `inst` must be a live handle, `support` must point to `len` indices
/// (may be null when `len == 0`) and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cbm_instance_marginal(
    inst: *const CbmInstance,
    support_ptr: *const usize,
    len: usize,
    out: *mut u8,
) -> CbmStatus {
    guard(|| {
        let h = instance(inst)?;
        let s = support(support_ptr, len)?;
        write(out, h.posterior.marginal(s)?, "out")
    })
}

/// JSON serialization; release the string with [`cbm_string_free`].
///
/// # Safety
/// `inst` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cbm_instance_to_json(inst: *const CbmInstance, out: *mut *mut c_char) -> CbmStatus {
    guard(|| {
        let text = instance(inst)?.instance.to_json()?;
        let c = CString::new(text).map_err(|e| Failure(CbmStatus::Internal, e.to_string()))?;
        write(out, c.into_raw(), "out")
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cbm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Empty row space over `n` variables.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cbm_gf2_new(n: usize, out: *mut *mut CbmGf2) -> CbmStatus {
    guard(|| {
        if n == 0 {
            return Err(Failure(CbmStatus::InvalidArgument, "n must be positive".into()));
        }
        write(out, Box::into_raw(Box::new(CbmGf2 { system: Gf2System::new(n) })), "out")
    })
}

/// Releases a row space. Null is ignored.
///
/// # Safety
/// `sys` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cbm_gf2_free(sys: *mut CbmGf2) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Adds the row with ones at `support[0..len]` (repeated indices cancel) and
/// reports the new rank through `rank_out` when it is non-null.
///
/// # Safety
/// `sys` must be a live handle and `support` must point to `len` indices.
#[no_mangle]
pub unsafe extern "C" fn cbm_gf2_add_row(sys: *mut CbmGf2, support_ptr: *const usize, len: usize, rank_out: *mut usize) -> CbmStatus {
    guard(|| {
        let h = sys.as_mut().ok_or_else(|| null("sys"))?;
        h.system.add_row(support(support_ptr, len)?)?;
        let rank = h.system.rank();
        if !rank_out.is_null() {
            rank_out.write(rank);
        }
        Ok(())
    })
}

/// # Safety
/// `sys` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cbm_gf2_rank(sys: *const CbmGf2, out: *mut usize) -> CbmStatus {
    guard(|| write(out, sys.as_ref().ok_or_else(|| null("sys"))?.system.rank(), "out"))
}

/// Writes 1 when the indicator of `support` lies in the row space, else 0.
///
/// # Safety
/// `sys` must be a live handle, `support` must point to `len` indices and
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cbm_gf2_in_row_space(sys: *const CbmGf2, support_ptr: *const usize, len: usize, out: *mut u8) -> CbmStatus {
    guard(|| {
        let h = sys.as_ref().ok_or_else(|| null("sys"))?;
        let inside = h.system.in_row_space(support(support_ptr, len)?)?;
        write(out, inside as u8, "out")
    })
}

/// Replica-symmetric free entropy at erasure mass `x`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cbm_h_rs(k: usize, alpha: f64, q: f64, x: f64, out: *mut f64) -> CbmStatus {
    guard(|| {
        let p = RsParams::new(k, alpha, q)?;
        if !(0.0..=1.0).contains(&x) {
            return Err(Failure(CbmStatus::InvalidArgument, format!("x = {x} not in [0, 1]")));
        }
        write(out, p.h_rs_scalar(x), "out")
    })
}

/// One density-evolution step on the erasure mass.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cbm_de_map(k: usize, alpha: f64, q: f64, z: f64, out: *mut f64) -> CbmStatus {
    guard(|| {
        let p = RsParams::new(k, alpha, q)?;
        if !(0.0..=1.0).contains(&z) {
            return Err(Failure(CbmStatus::InvalidArgument, format!("z = {z} not in [0, 1]")));
        }
        write(out, p.de_map(z), "out")
    })
}

/// Maximizer and maximum of the replica-symmetric free entropy.
///
/// # Safety
/// `x_out` and `h_out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cbm_sup_h_rs(
    k: usize,
    alpha: f64,
    q: f64,
    grid_points: usize,
    refine_tol: f64,
    x_out: *mut f64,
    h_out: *mut f64,
) -> CbmStatus {
    guard(|| {
        if x_out.is_null() || h_out.is_null() {
            return Err(null("x_out/h_out"));
        }
        let best = sup_h_rs(&RsParams::new(k, alpha, q)?, grid_points, refine_tol)?;
        write(x_out, best.x, "x_out")?;
        write(h_out, best.h, "h_out")
    })
}
