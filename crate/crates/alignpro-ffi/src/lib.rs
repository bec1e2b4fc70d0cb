//! C ABI over the alignpro core: opaque instance handles, flat result
//! structs, and integer status codes. The header is generated into
//! `include/alignpro.h` at build time.
//!
//! Conventions: every function returns an [`AlignproStatus`]; outputs are
//! written through pointers; on any non-OK status the thread-local error
//! message is retrievable via [`alignpro_last_error_message`].

use alignpro::harness::{
    generate_instance, load_instance, run_single, save_instance, InstanceMeta, InstanceSpec,
    RefStyle, RewardStyle,
};
use alignpro::{verify_bound, AlignmentInstance, Error};
use libc::{c_char, size_t};
use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

/// Status codes returned by every FFI entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignproStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    InvariantViolation = 5,
    Internal = 6,
}

/// Opaque problem-instance handle; create with the `alignpro_instance_*`
/// constructors and release with [`alignpro_instance_free`].
pub struct AlignproInstance {
    inner: AlignmentInstance,
    seed: u64,
}

/// Flat copy of one solved record.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AlignproRecord {
    pub seed: u64,
    pub n_prompts: u32,
    pub n_responses: u32,
    pub beta: f64,
    pub lambda: f64,
    pub j_star: f64,
    pub j_frozen: f64,
    pub j_tilde_star: f64,
    pub j_tilde_ref: f64,
    pub gap: f64,
    pub term1: f64,
    pub term2: f64,
    pub term3: f64,
    pub rhs: f64,
    pub slack: f64,
    pub kl_mean: f64,
    pub bound_holds: u8,
    pub wall_time_ms: u64,
}

/// Flat copy of a bound verification report.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AlignproBoundSummary {
    pub lhs_gap: f64,
    pub term1: f64,
    pub term2: f64,
    pub term3: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: u8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_last_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap();
    });
}

fn status_for(err: &Error) -> AlignproStatus {
    match err {
        Error::Io { .. } => AlignproStatus::Io,
        Error::Parse { .. } => AlignproStatus::Parse,
        Error::InvariantViolation(_) | Error::NotNormalized { .. } => {
            AlignproStatus::InvariantViolation
        }
        _ => AlignproStatus::InvalidArgument,
    }
}

fn fail(err: Error) -> AlignproStatus {
    let status = status_for(&err);
    set_last_error(&err.to_string());
    status
}

fn guarded<F: FnOnce() -> AlignproStatus>(f: F) -> AlignproStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic");
            AlignproStatus::Internal
        }
    }
}

/// # Safety
/// `out` must be a valid pointer; the returned handle must be released with
/// [`alignpro_instance_free`].
#[no_mangle]
pub unsafe extern "C" fn alignpro_instance_generate(
    n_prompts: u32,
    n_responses: u32,
    reward_style: u32,
    ref_style: u32,
    dirichlet_alpha: f64,
    beta: f64,
    lambda: f64,
    r_max: f64,
    seed: u64,
    out: *mut *mut AlignproInstance,
) -> AlignproStatus {
    guarded(|| {
        if out.is_null() {
            set_last_error("out pointer is null");
            return AlignproStatus::NullPointer;
        }
        let reward_style = match reward_style {
            0 => RewardStyle::UniformRandom,
            1 => RewardStyle::StructuredGap,
            2 => RewardStyle::Constant,
            other => {
                set_last_error(&format!("unknown reward_style {other}"));
                return AlignproStatus::InvalidArgument;
            }
        };
        let ref_style = match ref_style {
            0 => RefStyle::Dirichlet,
            1 => RefStyle::IdentityLike,
            other => {
                set_last_error(&format!("unknown ref_style {other}"));
                return AlignproStatus::InvalidArgument;
            }
        };
        let spec = InstanceSpec {
            n_prompts: n_prompts as usize,
            n_responses: n_responses as usize,
            reward_style,
            ref_style,
            dirichlet_alpha,
            beta,
            lambda,
            r_max,
            seed,
        };
        match generate_instance(&spec) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(AlignproInstance { inner, seed }));
                AlignproStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `path` must be a valid NUL-terminated UTF-8 string and `out` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn alignpro_instance_load(
    path: *const c_char,
    out: *mut *mut AlignproInstance,
) -> AlignproStatus {
    guarded(|| {
        if path.is_null() || out.is_null() {
            set_last_error("path or out pointer is null");
            return AlignproStatus::NullPointer;
        }
        let path = match CStr::from_ptr(path).to_str() {
            Ok(s) => s,
            Err(_) => {
                set_last_error("path is not valid UTF-8");
                return AlignproStatus::InvalidArgument;
            }
        };
        match load_instance(Path::new(path)) {
            Ok((inner, meta)) => {
                *out = Box::into_raw(Box::new(AlignproInstance {
                    inner,
                    seed: meta.seed,
                }));
                AlignproStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `handle` must come from a constructor in this library; `path` must be a
/// valid NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn alignpro_instance_save(
    handle: *const AlignproInstance,
    path: *const c_char,
) -> AlignproStatus {
    guarded(|| {
        if handle.is_null() || path.is_null() {
            set_last_error("handle or path pointer is null");
            return AlignproStatus::NullPointer;
        }
        let instance = &*handle;
        let path = match CStr::from_ptr(path).to_str() {
            Ok(s) => s,
            Err(_) => {
                set_last_error("path is not valid UTF-8");
                return AlignproStatus::InvalidArgument;
            }
        };
        match save_instance(
            &instance.inner,
            &InstanceMeta::new(instance.seed),
            Path::new(path),
        ) {
            Ok(()) => AlignproStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `handle` must come from a constructor in this library, or be null.
#[no_mangle]
pub unsafe extern "C" fn alignpro_instance_free(handle: *mut AlignproInstance) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Runs the full pipeline (optimal policy, optimal prompter, compositions,
/// gap, bound) on the instance.
///
/// # Safety
/// `handle` must come from a constructor in this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn alignpro_run_single(
    handle: *const AlignproInstance,
    out: *mut AlignproRecord,
) -> AlignproStatus {
    guarded(|| {
        if handle.is_null() || out.is_null() {
            set_last_error("handle or out pointer is null");
            return AlignproStatus::NullPointer;
        }
        let instance = &*handle;
        match run_single(&instance.inner, instance.seed) {
            Ok(r) => {
                *out = AlignproRecord {
                    seed: r.seed,
                    n_prompts: r.n_prompts as u32,
                    n_responses: r.n_responses as u32,
                    beta: r.beta,
                    lambda: r.lambda,
                    j_star: r.j_star,
                    j_frozen: r.j_frozen,
                    j_tilde_star: r.j_tilde_star,
                    j_tilde_ref: r.j_tilde_ref,
                    gap: r.gap,
                    term1: r.term1,
                    term2: r.term2,
                    term3: r.term3,
                    rhs: r.rhs,
                    slack: r.slack,
                    kl_mean: r.kl_mean,
                    bound_holds: r.bound_holds as u8,
                    wall_time_ms: r.wall_time_ms,
                };
                AlignproStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `handle` must come from a constructor in this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn alignpro_verify_bound(
    handle: *const AlignproInstance,
    out: *mut AlignproBoundSummary,
) -> AlignproStatus {
    guarded(|| {
        if handle.is_null() || out.is_null() {
            set_last_error("handle or out pointer is null");
            return AlignproStatus::NullPointer;
        }
        let instance = &*handle;
        match verify_bound(&instance.inner) {
            Ok(r) => {
                *out = AlignproBoundSummary {
                    lhs_gap: r.lhs_gap,
                    term1: r.term1,
                    term2: r.term2,
                    term3: r.term3,
                    rhs: r.rhs,
                    slack: r.slack,
                    holds: r.holds as u8,
                };
                AlignproStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Copies the last error message for this thread into `buf` (NUL-terminated,
/// truncating) and returns the full message length in bytes, excluding the
/// NUL. Passing a null or zero-length buffer just queries the length.
///
/// # Safety
/// `buf` must point to at least `len` writable bytes when non-null.
#[no_mangle]
pub unsafe extern "C" fn alignpro_last_error_message(buf: *mut c_char, len: size_t) -> size_t {
    LAST_ERROR.with(|slot| {
        let message = slot.borrow();
        let bytes = message.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}
