//! C ABI over `arousalnet`.
//!
//! Every entry point returns an [`AnStatus`]; on failure the message is kept
//! per thread and read back with [`an_last_error_message`]. Models live
//! behind the opaque [`AnModel`] handle, created by [`an_model_load`] and
//! released with [`an_model_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use arousalnet::cli::predict_record;
use arousalnet::error::Error;
use arousalnet::io::load_members;
use arousalnet::metrics::{gross_auprc, gross_auroc, ScoredPool};
use arousalnet::models::{ensemble_predict, ModelGraph};
use arousalnet::nn::Tensor3;
use arousalnet::prep::{Channel, Record};

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnStatus {
    Ok = 0,
    /// A required pointer was null.
    NullPointer = 1,
    InvalidArgument = 2,
    /// Array sizes disagree with each other or with the model.
    Shape = 3,
    Io = 4,
    /// A file is truncated, malformed or of the wrong type.
    Format = 5,
    Checksum = 6,
    KindMismatch = 7,
    NonFinite = 8,
    /// Scoring needs at least one arousal sample.
    NoPositives = 9,
    /// A bug inside the library; the message says where.
    Internal = 10,
}

/// Loaded model or ensemble.
pub struct AnModel {
    members: Vec<ModelGraph<f32>>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> AnStatus {
    match e {
        Error::InvalidArgument(_) | Error::EmptyClass(_) => AnStatus::InvalidArgument,
        Error::Shape { .. } => AnStatus::Shape,
        Error::NonFinite { .. } => AnStatus::NonFinite,
        Error::NoPositives => AnStatus::NoPositives,
        Error::Io { .. } => AnStatus::Io,
        Error::SizeMismatch { .. }
        | Error::BadMagic { .. }
        | Error::Truncated { .. }
        | Error::Malformed { .. }
        | Error::LabelDomain { .. }
        | Error::UnknownKind(_) => AnStatus::Format,
        Error::Checksum { .. } => AnStatus::Checksum,
        Error::KindMismatch { .. } => AnStatus::KindMismatch,
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

/// Runs `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> AnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            AnStatus::Ok
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("{what} is null"));
            AnStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            AnStatus::Internal
        }
    }
}

fn non_null<T>(p: *const T, what: &'static str) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail::Null(what))
    } else {
        Ok(())
    }
}

/// Borrow `n` elements; a null pointer is fine when `n` is 0.
unsafe fn slice<'a, T>(p: *const T, n: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn slice_mut<'a, T>(p: *mut T, n: usize, what: &'static str) -> Result<&'a mut [T], Fail> {
    if n == 0 {
        return Ok(&mut []);
    }
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts_mut(p, n))
}

fn checked_len(dims: &[usize], what: &str) -> Result<usize, Fail> {
    dims.iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .ok_or_else(|| Fail::Lib(Error::InvalidArgument(format!("{what} size overflows"))))
}

/// Message of the last failed call on this thread, or null after a
/// success. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn an_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn an_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a model or ensemble file into `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn an_model_load(path: *const c_char, out: *mut *mut AnModel) -> AnStatus {
    guard(|| {
        non_null(path, "path")?;
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Error::InvalidArgument("path is not UTF-8".into()))?;
        let members = load_members::<f32>(Path::new(path), None)?;
        *out = Box::into_raw(Box::new(AnModel { members }));
        Ok(())
    })
}

/// Releases a handle from [`an_model_load`]. Null is ignored.
///
/// # Safety
/// `model` must come from [`an_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn an_model_free(model: *mut AnModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Member count and input geometry `(channels, window length)`.
///
/// # Safety
/// `model` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn an_model_info(
    model: *const AnModel,
    members: *mut usize,
    channels: *mut usize,
    window_len: *mut usize,
) -> AnStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(members, "members")?;
        non_null(channels, "channels")?;
        non_null(window_len, "window_len")?;
        let m = &*model;
        let cfg = m.members[0].config;
        *members = m.members.len();
        *channels = cfg.in_channels;
        *window_len = cfg.input_len;
        Ok(())
    })
}

/// Arousal probability per window, averaged over members.
///
/// `windows` holds `n` windows laid out `[n][channels][window_len]`; `out`
/// receives `n` values.
///
/// # Safety
/// `model` must be a live handle and the arrays must hold the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn an_model_predict_windows(
    model: *mut AnModel,
    windows: *const f32,
    n: usize,
    channels: usize,
    window_len: usize,
    out: *mut f32,
) -> AnStatus {
    guard(|| {
        non_null(model, "model")?;
        let m = &mut *model;
        let len = checked_len(&[n, channels, window_len], "windows")?;
        let data = slice(windows, len, "windows")?;
        let out = slice_mut(out, n, "out")?;
        if n == 0 {
            return Ok(());
        }
        let x = Tensor3::from_vec([n, channels, window_len], data.to_vec())?;
        m.members[0].check_input(&x)?;
        let p = ensemble_predict(&mut m.members, &x)?;
        for (b, o) in out.iter_mut().enumerate() {
            *o = p.get(b, 1, 0);
        }
        Ok(())
    })
}

/// Full inference on one raw recording: normalize, decimate, window,
/// predict and spread window scores back over samples.
///
/// `signal` is channel-major, `[channels][n_samples]`, at `fs` Hz; `out`
/// receives `n_samples` probabilities.
///
/// # Safety
/// `model` must be a live handle and the arrays must hold the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn an_model_predict_record(
    model: *mut AnModel,
    signal: *const f32,
    channels: usize,
    n_samples: usize,
    fs: f64,
    out: *mut f32,
) -> AnStatus {
    guard(|| {
        non_null(model, "model")?;
        let m = &mut *model;
        let len = checked_len(&[channels, n_samples], "signal")?;
        let data = slice(signal, len, "signal")?;
        let out = slice_mut(out, n_samples, "out")?;
        let chans = (0..channels)
            .map(|c| Channel {
                name: format!("ch{c}"),
                samples: data[c * n_samples..(c + 1) * n_samples].to_vec(),
            })
            .collect();
        let record = Record::new("ffi", fs, chans, vec![0; n_samples])?;
        let probs = predict_record(&mut m.members, &record, 16)?;
        out.copy_from_slice(&probs);
        Ok(())
    })
}

unsafe fn pool(scores: *const f64, labels: *const i8, n: usize) -> Result<ScoredPool, Fail> {
    let s = slice(scores, n, "scores")?;
    let l = slice(labels, n, "labels")?;
    Ok(ScoredPool::from_labeled(s, l)?)
}

/// Gross AUPRC of scores against labels in `{-1, 0, 1}`; `-1` is skipped.
///
/// # Safety
/// `scores` and `labels` must hold `n` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn an_gross_auprc(
    scores: *const f64,
    labels: *const i8,
    n: usize,
    out: *mut f64,
) -> AnStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = gross_auprc(&pool(scores, labels, n)?)?;
        Ok(())
    })
}

/// Gross AUROC, same conventions as [`an_gross_auprc`].
///
/// # Safety
/// `scores` and `labels` must hold `n` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn an_gross_auroc(
    scores: *const f64,
    labels: *const i8,
    n: usize,
    out: *mut f64,
) -> AnStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = gross_auroc(&pool(scores, labels, n)?)?;
        Ok(())
    })
}
