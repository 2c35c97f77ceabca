//! C ABI over the `nframes` library.
//!
//! Every fallible call returns an [`NfStatus`]. On failure a message is kept
//! per thread and can be read with [`nf_last_error_message`]. Strings handed
//! out by the library must be released with [`nf_string_free`]; models with
//! [`nf_model_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use nframes::agreement::{krippendorff_alpha, rouge_l, ReliabilityMatrix};
use nframes::annotation::{aggregate_all, AnnotationRecord, Codebook};
use nframes::corpus::parse_corpus;
use nframes::embed::hash_embed;
use nframes::eval::harmonic_f1;
use nframes::jsonl::{parse_jsonl, write_jsonl_to};
use nframes::pipeline::Predictor;
use nframes::Error;

/// Result codes shared by every function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    Io = 4,
    Parse = 5,
    Embedding = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Opaque handle to a trained model.
pub struct NfModel {
    predictor: Predictor,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> NfStatus {
    match err {
        Error::Io { .. } => NfStatus::Io,
        Error::Malformed { .. } | Error::Schema { .. } | Error::Json(_) | Error::Csv(_) => {
            NfStatus::Parse
        }
        Error::Transport(_) | Error::Protocol(_) => NfStatus::Embedding,
        _ => NfStatus::InvalidInput,
    }
}

/// Run `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (NfStatus, String)>) -> NfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NfStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            NfStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (NfStatus, String) {
    (status_of(&e), e.to_string())
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (NfStatus, String)> {
    if p.is_null() {
        return Err((NfStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (NfStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn check_out<T>(p: *mut T, what: &str) -> Result<(), (NfStatus, String)> {
    if p.is_null() {
        Err((NfStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

fn into_c_string(s: String) -> Result<*mut c_char, (NfStatus, String)> {
    CString::new(s).map(CString::into_raw).map_err(|_| {
        (
            NfStatus::InvalidInput,
            "output contains a NUL byte".to_string(),
        )
    })
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn nf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn nf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Release a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn nf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Load a model from a directory or `model.json` path.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nf_model_load(path: *const c_char, out: *mut *mut NfModel) -> NfStatus {
    guard(|| {
        check_out(out, "out")?;
        *out = ptr::null_mut();
        let path = read_str(path, "path")?;
        let predictor = Predictor::load(Path::new(path)).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(NfModel { predictor }));
        Ok(())
    })
}

/// Release a model. NULL is ignored.
///
/// # Safety
/// `model` must come from [`nf_model_load`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn nf_model_free(model: *mut NfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Method name of a loaded model (e.g. `rbf`). Free with [`nf_string_free`].
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nf_model_method(model: *const NfModel, out: *mut *mut c_char) -> NfStatus {
    guard(|| {
        check_out(out, "out")?;
        let model = model
            .as_ref()
            .ok_or((NfStatus::NullPointer, "model is null".to_string()))?;
        *out = into_c_string(model.predictor.model().method.to_string())?;
        Ok(())
    })
}

/// Predict every frame for the articles in `articles_jsonl` (one article
/// object per line). Writes prediction JSONL to `out`; free it with
/// [`nf_string_free`].
///
/// # Safety
/// `model` must be a live handle, `articles_jsonl` NUL-terminated and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn nf_model_predict_json(
    model: *const NfModel,
    articles_jsonl: *const c_char,
    with_evidence: c_int,
    out: *mut *mut c_char,
) -> NfStatus {
    guard(|| {
        check_out(out, "out")?;
        *out = ptr::null_mut();
        let model = model
            .as_ref()
            .ok_or((NfStatus::NullPointer, "model is null".to_string()))?;
        let text = read_str(articles_jsonl, "articles_jsonl")?;
        let articles = parse_corpus(text.as_bytes()).map_err(lib_err)?;
        let preds = model
            .predictor
            .predict(&articles, with_evidence != 0)
            .map_err(lib_err)?;
        let mut buf = Vec::new();
        write_jsonl_to(&mut buf, &preds).map_err(lib_err)?;
        *out = into_c_string(String::from_utf8(buf).expect("serde_json writes UTF-8"))?;
        Ok(())
    })
}

/// Harmonic mean of precision and recall; 0 when both are 0.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nf_harmonic_f1(precision: f64, recall: f64, out: *mut f64) -> NfStatus {
    guard(|| {
        check_out(out, "out")?;
        if !(0.0..=1.0).contains(&precision) || !(0.0..=1.0).contains(&recall) {
            return Err((
                NfStatus::InvalidInput,
                "precision and recall must lie in [0, 1]".into(),
            ));
        }
        *out = harmonic_f1(precision, recall);
        Ok(())
    })
}

/// ROUGE-L F-measure between two entity strings.
///
/// # Safety
/// `a` and `b` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nf_rouge_l(a: *const c_char, b: *const c_char, out: *mut f64) -> NfStatus {
    guard(|| {
        check_out(out, "out")?;
        *out = rouge_l(read_str(a, "a")?, read_str(b, "b")?);
        Ok(())
    })
}

/// Krippendorff's alpha for binary data. `rows_json` is a JSON array of
/// units, each an array with one entry per annotator: `true`, `false` or
/// `null` for a missing answer.
///
/// # Safety
/// `rows_json` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nf_krippendorff_alpha_json(
    rows_json: *const c_char,
    out: *mut f64,
) -> NfStatus {
    guard(|| {
        check_out(out, "out")?;
        let rows: Vec<Vec<Option<bool>>> = serde_json::from_str(read_str(rows_json, "rows_json")?)
            .map_err(|e| (NfStatus::Parse, e.to_string()))?;
        let m = ReliabilityMatrix::from_rows(rows).map_err(lib_err)?;
        *out = krippendorff_alpha(&m).map_err(lib_err)?;
        Ok(())
    })
}

/// Hash-embed `text` into `out[0..dim]`. `out_len` must be at least `dim`.
///
/// # Safety
/// `text` must be NUL-terminated; `out` must point to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn nf_hash_embed(
    text: *const c_char,
    dim: usize,
    out: *mut f64,
    out_len: usize,
) -> NfStatus {
    guard(|| {
        check_out(out, "out")?;
        let text = read_str(text, "text")?;
        if dim < nframes::embed::MIN_DIM {
            return Err((
                NfStatus::InvalidInput,
                format!("dim must be at least {}", nframes::embed::MIN_DIM),
            ));
        }
        if out_len < dim {
            return Err((
                NfStatus::BufferTooSmall,
                format!("buffer holds {out_len} values, need {dim}"),
            ));
        }
        let v = hash_embed(text, dim);
        std::slice::from_raw_parts_mut(out, dim).copy_from_slice(v.values());
        Ok(())
    })
}

/// Aggregate annotation JSONL with the bundled codebook into label JSONL.
/// Free the result with [`nf_string_free`].
///
/// # Safety
/// `annotations_jsonl` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nf_aggregate_json(
    annotations_jsonl: *const c_char,
    out: *mut *mut c_char,
) -> NfStatus {
    guard(|| {
        check_out(out, "out")?;
        *out = ptr::null_mut();
        let text = read_str(annotations_jsonl, "annotations_jsonl")?;
        let records: Vec<AnnotationRecord> = parse_jsonl(text.as_bytes()).map_err(lib_err)?;
        let codebook = Codebook::bundled();
        for r in &records {
            r.validate(&codebook).map_err(lib_err)?;
        }
        let labels = aggregate_all(&records, &codebook).map_err(lib_err)?;
        let mut buf = Vec::new();
        write_jsonl_to(&mut buf, &labels).map_err(lib_err)?;
        *out = into_c_string(String::from_utf8(buf).expect("serde_json writes UTF-8"))?;
        Ok(())
    })
}
