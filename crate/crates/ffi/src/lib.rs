//! C ABI over `mcqt`.
//!
//! Handles are opaque and owned by the caller once returned; free them with
//! the matching `*_free`. Every fallible call returns an [`McqtStatus`];
//! on failure [`mcqt_last_error`] describes the error for the calling thread.
//! Strings handed out by the library are freed with [`mcqt_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, UnwindSafe};
use std::ptr;

use mcqt::protocol::{run, OutcomeSource};
use mcqt::verify::{derive_both_parities, enumerate_branches, reconcile, FIDELITY_TOLERANCE};
use mcqt::{tables, EprVariant, Error, MessageState, ProtocolConfig, TableSource};
use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum McqtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidState = 3,
    BudgetExceeded = 4,
    OracleFailure = 5,
    Internal = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum McqtEpr {
    PhiPlus = 0,
    PhiMinus = 1,
    PsiPlus = 2,
    PsiMinus = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum McqtTable {
    Derived = 0,
    Paper = 1,
}

/// Opaque message state.
pub struct McqtMessage {
    inner: MessageState,
}

/// Opaque protocol configuration.
pub struct McqtConfig {
    inner: ProtocolConfig,
}

impl From<McqtEpr> for EprVariant {
    fn from(e: McqtEpr) -> Self {
        match e {
            McqtEpr::PhiPlus => EprVariant::PhiPlus,
            McqtEpr::PhiMinus => EprVariant::PhiMinus,
            McqtEpr::PsiPlus => EprVariant::PsiPlus,
            McqtEpr::PsiMinus => EprVariant::PsiMinus,
        }
    }
}

impl From<McqtTable> for TableSource {
    fn from(t: McqtTable) -> Self {
        match t {
            McqtTable::Derived => TableSource::OracleDerived,
            McqtTable::Paper => TableSource::PaperStated,
        }
    }
}

fn status_of(e: &Error) -> McqtStatus {
    match e {
        Error::InvalidConfig(_)
        | Error::RegisterTooLarge { .. }
        | Error::ForcedOutcomes(_)
        | Error::StepOrder(_)
        | Error::Io(_)
        | Error::Parse { .. } => McqtStatus::InvalidArgument,
        Error::NotNormalized { .. }
        | Error::DimensionMismatch { .. }
        | Error::NotPowerOfTwo(_)
        | Error::BasisIndexOutOfRange { .. } => McqtStatus::InvalidState,
        Error::BudgetExceeded { .. } => McqtStatus::BudgetExceeded,
        Error::ModelFalsified(_) | Error::Ambiguous { .. } => McqtStatus::OracleFailure,
        _ => McqtStatus::Internal,
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: McqtStatus, message: impl Into<String>) -> McqtStatus {
    set_error(message.into());
    status
}

/// Clears the last error, runs `f`, and turns errors and panics into
/// statuses.
fn guard<F>(f: F) -> McqtStatus
where
    F: FnOnce() -> Result<(), McqtStatus> + UnwindSafe,
{
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(f) {
        Ok(Ok(())) => McqtStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(McqtStatus::Panic, "panic inside mcqt"),
    }
}

fn lift<T>(r: mcqt::Result<T>) -> Result<T, McqtStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), McqtStatus> {
    if p.is_null() {
        Err(fail(McqtStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).expect("json has no nul bytes").into_raw()
}

/// Message of the calling thread's last failed call, or null. Valid until
/// the next call on the same thread.
#[no_mangle]
pub extern "C" fn mcqt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn mcqt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message from `len` amplitudes given as separate real and imaginary
/// arrays. `len` must be a power of two and the state normalized within 1e-6.
///
/// # Safety
/// `re` and `im` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mcqt_message_new(
    re: *const f64,
    im: *const f64,
    len: usize,
    out: *mut *mut McqtMessage,
) -> McqtStatus {
    guard(|| {
        non_null(re, "re")?;
        non_null(im, "im")?;
        non_null(out, "out")?;
        let (re, im) = unsafe {
            (
                std::slice::from_raw_parts(re, len),
                std::slice::from_raw_parts(im, len),
            )
        };
        let amps = re
            .iter()
            .zip(im)
            .map(|(&r, &i)| Complex64::new(r, i))
            .collect();
        let inner = lift(MessageState::new(amps))?;
        unsafe { *out = Box::into_raw(Box::new(McqtMessage { inner })) };
        Ok(())
    })
}

/// Seeded full-support random message on `n` qubits.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mcqt_message_random(
    n: usize,
    seed: u64,
    out: *mut *mut McqtMessage,
) -> McqtStatus {
    guard(|| {
        non_null(out, "out")?;
        if n == 0 || n > 16 {
            return Err(fail(McqtStatus::InvalidArgument, "n must be in 1..=16"));
        }
        let inner = MessageState::seeded(n, seed);
        unsafe { *out = Box::into_raw(Box::new(McqtMessage { inner })) };
        Ok(())
    })
}

/// The fixed three-qubit example message.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mcqt_message_example3x2(out: *mut *mut McqtMessage) -> McqtStatus {
    guard(|| {
        non_null(out, "out")?;
        let inner = MessageState::example3x2();
        unsafe { *out = Box::into_raw(Box::new(McqtMessage { inner })) };
        Ok(())
    })
}

/// Qubit count of `message`, or 0 when null.
///
/// # Safety
/// `message` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mcqt_message_num_qubits(message: *const McqtMessage) -> usize {
    unsafe { message.as_ref() }.map_or(0, |m| m.inner.n())
}

/// # Safety
/// `message` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mcqt_message_free(message: *mut McqtMessage) {
    if !message.is_null() {
        drop(unsafe { Box::from_raw(message) });
    }
}

/// Validated configuration for `n` message qubits and `m` controllers.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mcqt_config_new(
    n: usize,
    m: usize,
    epr: McqtEpr,
    table: McqtTable,
    out: *mut *mut McqtConfig,
) -> McqtStatus {
    guard(|| {
        non_null(out, "out")?;
        let inner = ProtocolConfig::new(n, m, epr.into()).with_table(table.into());
        lift(inner.validate())?;
        unsafe { *out = Box::into_raw(Box::new(McqtConfig { inner })) };
        Ok(())
    })
}

/// # Safety
/// `config` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mcqt_config_free(config: *mut McqtConfig) {
    if !config.is_null() {
        drop(unsafe { Box::from_raw(config) });
    }
}

unsafe fn handles<'a>(
    config: *const McqtConfig,
    message: *const McqtMessage,
) -> Result<(&'a ProtocolConfig, &'a MessageState), McqtStatus> {
    non_null(config, "config")?;
    non_null(message, "message")?;
    unsafe { Ok((&(*config).inner, &(*message).inner)) }
}

/// One sampled run seeded with `seed`. Writes the transcript as JSON to
/// `out_json` and Bob's fidelity to `out_fidelity` (either may be null).
///
/// # Safety
/// Handles must be live; out pointers null or writable.
#[no_mangle]
pub unsafe extern "C" fn mcqt_run(
    config: *const McqtConfig,
    message: *const McqtMessage,
    seed: u64,
    out_json: *mut *mut c_char,
    out_fidelity: *mut f64,
) -> McqtStatus {
    guard(|| {
        let (config, message) = unsafe { handles(config, message) }?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let transcript = lift(run(config, message, OutcomeSource::Sampled(&mut rng)))?;
        if !out_fidelity.is_null() {
            unsafe { *out_fidelity = transcript.fidelity };
        }
        if !out_json.is_null() {
            let json = serde_json::to_string(&transcript).expect("transcripts serialize");
            unsafe { *out_json = into_c_string(json) };
        }
        Ok(())
    })
}

/// Every branch, as a JSON array of branch reports. `out_failing` receives
/// how many branches miss fidelity 1 under the configuration's table.
///
/// # Safety
/// Handles must be live; out pointers null or writable.
#[no_mangle]
pub unsafe extern "C" fn mcqt_enumerate(
    config: *const McqtConfig,
    message: *const McqtMessage,
    out_json: *mut *mut c_char,
    out_failing: *mut u64,
) -> McqtStatus {
    guard(|| {
        let (config, message) = unsafe { handles(config, message) }?;
        let reports = lift(enumerate_branches(config, message))?;
        if !out_failing.is_null() {
            let failing = reports
                .iter()
                .filter(|r| r.fidelity(config.table_source) < 1.0 - FIDELITY_TOLERANCE)
                .count();
            unsafe { *out_failing = failing as u64 };
        }
        if !out_json.is_null() {
            let json = serde_json::to_string(&reports).expect("reports serialize");
            unsafe { *out_json = into_c_string(json) };
        }
        Ok(())
    })
}

/// Printed-versus-derived reconciliation for one channel, as JSON.
///
/// # Safety
/// `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mcqt_reconcile(epr: McqtEpr, out_json: *mut *mut c_char) -> McqtStatus {
    guard(|| {
        non_null(out_json, "out_json")?;
        let v = EprVariant::from(epr);
        let (even, odd) = lift(derive_both_parities(v))?;
        let report = lift(reconcile(&tables::paper_table(v), &even, &odd))?;
        let json = serde_json::to_string(&report).expect("reports serialize");
        unsafe { *out_json = into_c_string(json) };
        Ok(())
    })
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mcqt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Borrowed view of a C string, for tests and callers in Rust.
///
/// # Safety
/// `s` must be a valid nul-terminated string.
pub unsafe fn borrow_c_str<'a>(s: *const c_char) -> &'a str {
    unsafe { CStr::from_ptr(s) }.to_str().unwrap_or("")
}
