//! C ABI over the re-translation toolkit. Models and prefix translation
//! lists are opaque heap handles; every entry point null-checks its
//! arguments, catches panics, and reports failures through a per-thread
//! error string. The generated header lands in `include/retrans.h`.
//!
//! Memory rules: handles are freed by their matching `*_free`; strings
//! returned through `char **` are freed with `retrans_string_free`;
//! `retrans_version` and `retrans_last_error` return borrowed pointers
//! that must not be freed.
//!
//! Safety contract, shared by every pointer-taking function: `char`
//! pointers are NUL-terminated or null, handle pointers came from this
//! library and have not been freed, out-pointers are writable or null.
//! Null arguments are reported as `NullArgument`, never dereferenced.

#![deny(unsafe_op_in_unsafe_fn)]
// The per-function contract is the crate-level one above; repeating a
// Safety section on all fourteen functions would drown the header docs.
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use retrans_core::decode::{DecodeConfig, DecodeError};
use retrans_core::metrics::{content_delay, corpus_bleu, dal, normalized_erasure};
use retrans_core::model::ModelError;
use retrans_core::ptl::{PtlRecord, TokenSeq};
use retrans_core::scorer::build_model;
use retrans_core::simulate::{run_policy, PolicyKind, SimulateError};
use retrans_core::ScoringModel;

/// Result of every fallible call. Inspect `retrans_last_error` for a
/// human-readable message after any non-OK status.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetransStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidInput = 4,
    RuntimeError = 5,
    Panicked = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetransPolicy {
    Retranslate = 0,
    StreamWaitk = 1,
}

/// Opaque scoring model handle.
pub struct RetransModel {
    inner: Box<dyn ScoringModel>,
}

/// Opaque prefix translation list handle.
pub struct RetransPtl {
    record: PtlRecord,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: RetransStatus, message: impl Into<String>) -> RetransStatus {
    let message = message.into().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(message).expect("NUL stripped above");
    });
    status
}

fn clear_error() {
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::default();
    });
}

fn guarded(body: impl FnOnce() -> RetransStatus) -> RetransStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(RetransStatus::Panicked, "internal panic"),
    }
}

/// None when the pointer is null or the bytes are not UTF-8; the error
/// is already recorded.
unsafe fn utf8_arg<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, RetransStatus> {
    if ptr.is_null() {
        return Err(fail(
            RetransStatus::NullArgument,
            format!("{what} must not be null"),
        ));
    }
    unsafe { CStr::from_ptr(ptr) }.to_str().map_err(|_| {
        fail(
            RetransStatus::InvalidUtf8,
            format!("{what} is not valid UTF-8"),
        )
    })
}

fn model_status(e: &ModelError) -> RetransStatus {
    match e {
        ModelError::Scorer(_) => RetransStatus::RuntimeError,
        _ => RetransStatus::InvalidInput,
    }
}

fn decode_status(e: &DecodeError) -> RetransStatus {
    match e {
        DecodeError::Model(m) => model_status(m),
        _ => RetransStatus::InvalidInput,
    }
}

fn simulate_status(e: &SimulateError) -> RetransStatus {
    match e {
        SimulateError::Decode { source, .. } => decode_status(source),
        SimulateError::EmptySource => RetransStatus::InvalidInput,
        SimulateError::NotAppendOnly => RetransStatus::RuntimeError,
    }
}

/// Toolkit version as a borrowed static string.
#[no_mangle]
pub extern "C" fn retrans_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the most recent failure on this thread; empty after a
/// success. Borrowed; valid until the next failing call on the thread.
#[no_mangle]
pub extern "C" fn retrans_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Frees a string returned through a `char **` out-parameter.
#[no_mangle]
pub unsafe extern "C" fn retrans_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Builds a model from config JSON: `{"seed":..,"vocab":[..]}`,
/// `{"tables":{..},"eos_when_covered":..}`, or `{"command":..}` for an
/// external scorer subprocess.
#[no_mangle]
pub unsafe extern "C" fn retrans_model_from_json(
    json: *const c_char,
    out: *mut *mut RetransModel,
) -> RetransStatus {
    guarded(|| {
        if out.is_null() {
            return fail(RetransStatus::NullArgument, "out must not be null");
        }
        let json = match unsafe { utf8_arg(json, "model JSON") } {
            Ok(v) => v,
            Err(status) => return status,
        };
        let config = match serde_json::from_str(json) {
            Ok(config) => config,
            Err(e) => return fail(RetransStatus::ParseError, format!("model config: {e}")),
        };
        match build_model(&config) {
            Ok(inner) => {
                clear_error();
                unsafe { *out = Box::into_raw(Box::new(RetransModel { inner })) };
                RetransStatus::Ok
            }
            Err(e) => fail(model_status(&e), e.to_string()),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn retrans_model_free(model: *mut RetransModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Parses one PTL record: `{"id":..,"source":[..],"outputs":[[..],..]}`.
#[no_mangle]
pub unsafe extern "C" fn retrans_ptl_from_json(
    json: *const c_char,
    out: *mut *mut RetransPtl,
) -> RetransStatus {
    guarded(|| {
        if out.is_null() {
            return fail(RetransStatus::NullArgument, "out must not be null");
        }
        let json = match unsafe { utf8_arg(json, "PTL JSON") } {
            Ok(v) => v,
            Err(status) => return status,
        };
        match retrans_core::io::parse_ptl_jsonl("ptl", json) {
            Ok(mut records) if records.len() == 1 => {
                clear_error();
                let record = records.pop().expect("length checked");
                unsafe { *out = Box::into_raw(Box::new(RetransPtl { record })) };
                RetransStatus::Ok
            }
            Ok(records) => fail(
                RetransStatus::InvalidInput,
                format!("expected exactly one record, got {}", records.len()),
            ),
            Err(e) => fail(RetransStatus::ParseError, e.to_string()),
        }
    })
}

/// Serializes a PTL handle back to its JSON line. The string is owned
/// by the caller; free it with `retrans_string_free`.
#[no_mangle]
pub unsafe extern "C" fn retrans_ptl_to_json(
    ptl: *const RetransPtl,
    out: *mut *mut c_char,
) -> RetransStatus {
    guarded(|| {
        if ptl.is_null() || out.is_null() {
            return fail(RetransStatus::NullArgument, "ptl and out must not be null");
        }
        let record = unsafe { &(*ptl).record };
        let mut line = retrans_core::io::render_ptl_jsonl(std::slice::from_ref(record));
        if line.ends_with('\n') {
            line.pop();
        }
        match CString::new(line) {
            Ok(s) => {
                clear_error();
                unsafe { *out = s.into_raw() };
                RetransStatus::Ok
            }
            Err(_) => fail(RetransStatus::RuntimeError, "interior NUL in rendered JSON"),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn retrans_ptl_free(ptl: *mut RetransPtl) {
    if !ptl.is_null() {
        drop(unsafe { Box::from_raw(ptl) });
    }
}

/// Source length in tokens; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn retrans_ptl_source_len(ptl: *const RetransPtl) -> usize {
    if ptl.is_null() {
        return 0;
    }
    unsafe { &(*ptl).record }.ptl.source_len()
}

/// Final output length in tokens; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn retrans_ptl_final_len(ptl: *const RetransPtl) -> usize {
    if ptl.is_null() {
        return 0;
    }
    unsafe { &(*ptl).record }.ptl.final_len()
}

/// True when no output revises its predecessor; false for null.
#[no_mangle]
pub unsafe extern "C" fn retrans_ptl_is_append_only(ptl: *const RetransPtl) -> bool {
    if ptl.is_null() {
        return false;
    }
    unsafe { &(*ptl).record }.ptl.is_append_only()
}

/// Total erased suffix tokens divided by final length.
#[no_mangle]
pub unsafe extern "C" fn retrans_ptl_normalized_erasure(
    ptl: *const RetransPtl,
    out: *mut f64,
) -> RetransStatus {
    guarded(|| {
        if ptl.is_null() || out.is_null() {
            return fail(RetransStatus::NullArgument, "ptl and out must not be null");
        }
        match normalized_erasure(unsafe { &(*ptl).record.ptl }) {
            Ok(value) => {
                clear_error();
                unsafe { *out = value };
                RetransStatus::Ok
            }
            Err(e) => fail(RetransStatus::InvalidInput, e.to_string()),
        }
    })
}

/// Differentiable average lagging of the list's content delays.
#[no_mangle]
pub unsafe extern "C" fn retrans_ptl_dal(ptl: *const RetransPtl, out: *mut f64) -> RetransStatus {
    guarded(|| {
        if ptl.is_null() || out.is_null() {
            return fail(RetransStatus::NullArgument, "ptl and out must not be null");
        }
        let delays = match content_delay(unsafe { &(*ptl).record.ptl }) {
            Ok(d) => d,
            Err(e) => return fail(RetransStatus::InvalidInput, e.to_string()),
        };
        match dal(&delays) {
            Ok(value) => {
                clear_error();
                unsafe { *out = value };
                RetransStatus::Ok
            }
            Err(e) => fail(RetransStatus::InvalidInput, e.to_string()),
        }
    })
}

/// Copies the per-token content delays into `out_delays`. `out_len`
/// always receives the required length; the copy happens only when
/// `capacity` suffices.
#[no_mangle]
pub unsafe extern "C" fn retrans_ptl_content_delay(
    ptl: *const RetransPtl,
    out_delays: *mut usize,
    capacity: usize,
    out_len: *mut usize,
) -> RetransStatus {
    guarded(|| {
        if ptl.is_null() || out_len.is_null() {
            return fail(
                RetransStatus::NullArgument,
                "ptl and out_len must not be null",
            );
        }
        let delays = match content_delay(unsafe { &(*ptl).record.ptl }) {
            Ok(d) => d,
            Err(e) => return fail(RetransStatus::InvalidInput, e.to_string()),
        };
        let needed = delays.delays().len();
        unsafe { *out_len = needed };
        if capacity < needed {
            return fail(
                RetransStatus::InvalidInput,
                format!("delay buffer holds {capacity}, need {needed}"),
            );
        }
        if needed > 0 {
            if out_delays.is_null() {
                return fail(RetransStatus::NullArgument, "out_delays must not be null");
            }
            unsafe {
                std::ptr::copy_nonoverlapping(delays.delays().as_ptr(), out_delays, needed);
            }
        }
        clear_error();
        RetransStatus::Ok
    })
}

/// Runs a policy over one whitespace-tokenized source sentence and
/// returns the resulting PTL handle.
#[no_mangle]
pub unsafe extern "C" fn retrans_simulate(
    model: *const RetransModel,
    source: *const c_char,
    policy: RetransPolicy,
    beta: f64,
    k: usize,
    beam: usize,
    out: *mut *mut RetransPtl,
) -> RetransStatus {
    guarded(|| {
        if model.is_null() || out.is_null() {
            return fail(
                RetransStatus::NullArgument,
                "model and out must not be null",
            );
        }
        let source = match unsafe { utf8_arg(source, "source") } {
            Ok(v) => v,
            Err(status) => return status,
        };
        let source = TokenSeq::parse(source);
        let config = DecodeConfig {
            beta,
            k,
            beam,
            ..DecodeConfig::default()
        };
        if let Err(e) = config.validate() {
            return fail(RetransStatus::InvalidInput, e.to_string());
        }
        let kind = match policy {
            RetransPolicy::Retranslate => PolicyKind::Retranslate,
            RetransPolicy::StreamWaitk => PolicyKind::StreamWaitk,
        };
        let inner = unsafe { &(*model).inner };
        match run_policy(inner.as_ref(), &source, kind, &config) {
            Ok(run) => {
                clear_error();
                let record = PtlRecord {
                    id: "ffi".to_string(),
                    ptl: run.ptl,
                };
                unsafe { *out = Box::into_raw(Box::new(RetransPtl { record })) };
                RetransStatus::Ok
            }
            Err(e) => fail(simulate_status(&e), e.to_string()),
        }
    })
}

/// Corpus BLEU between newline-separated token lines (percentage).
#[no_mangle]
pub unsafe extern "C" fn retrans_corpus_bleu(
    hypotheses: *const c_char,
    references: *const c_char,
    out: *mut f64,
) -> RetransStatus {
    guarded(|| {
        if out.is_null() {
            return fail(RetransStatus::NullArgument, "out must not be null");
        }
        let hyp_text = match unsafe { utf8_arg(hypotheses, "hypotheses") } {
            Ok(v) => v,
            Err(status) => return status,
        };
        let ref_text = match unsafe { utf8_arg(references, "references") } {
            Ok(v) => v,
            Err(status) => return status,
        };
        let hyps: Vec<TokenSeq> = hyp_text.lines().map(TokenSeq::parse).collect();
        let refs: Vec<TokenSeq> = ref_text.lines().map(TokenSeq::parse).collect();
        match corpus_bleu(&hyps, &refs) {
            Ok(value) => {
                clear_error();
                unsafe { *out = value };
                RetransStatus::Ok
            }
            Err(e) => fail(RetransStatus::InvalidInput, e.to_string()),
        }
    })
}
