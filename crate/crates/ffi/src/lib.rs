//! C ABI over the core library.
//!
//! Every function returns an [`SbStatus`]; on failure the message is kept
//! per thread and read with [`sb_last_error_message`]. Objects are opaque
//! handles owned by the caller and released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use stillbench::augment::mix::stillmix_with;
use stillbench::bench::composite;
use stillbench::harness::{run_experiment, ExperimentConfig};
use stillbench::io::{read_sbvd, write_sbvd};
use stillbench::{Error, MaskSequence, Video};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Dimension = 3,
    Config = 4,
    Validation = 5,
    Io = 6,
    Format = 7,
    EmptyBank = 8,
    NonFinite = 9,
    Panic = 10,
    Other = 11,
}

/// A clip or mask of `C x T x H x W` 32-bit reals.
pub struct SbVideo(Video);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SbStatus {
    match e {
        Error::Dimension(_) => SbStatus::Dimension,
        Error::Config(_) | Error::Parameter(_) | Error::Pool(_) => SbStatus::Config,
        Error::Validation(_) | Error::InvalidTarget(_) | Error::EmptyInput(_) => SbStatus::Validation,
        Error::Io(_) => SbStatus::Io,
        Error::Format { .. } | Error::Json(_) => SbStatus::Format,
        Error::EmptyBank { .. } => SbStatus::EmptyBank,
        Error::NonFinite(_) => SbStatus::NonFinite,
        Error::Stage { source, .. } => status_of(source),
    }
}

struct Fail(SbStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SbStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SbStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(SbStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| Fail(SbStatus::NullPointer, format!("{what} is null")))
}

unsafe fn string_arg(p: *const c_char, what: &str) -> Result<String, Fail> {
    if p.is_null() {
        return Err(Fail(SbStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Fail(SbStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn boxed(v: Video) -> *mut SbVideo {
    Box::into_raw(Box::new(SbVideo(v)))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Copies `c*t*h*w` values from `data` into a new video.
///
/// # Safety
/// `data` must point to that many readable floats; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_video_new(
    c: usize,
    t: usize,
    h: usize,
    w: usize,
    data: *const f32,
    out: *mut *mut SbVideo,
) -> SbStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let len = c
            .checked_mul(t)
            .and_then(|v| v.checked_mul(h))
            .and_then(|v| v.checked_mul(w))
            .ok_or_else(|| Fail(SbStatus::Dimension, "video size overflows".into()))?;
        if data.is_null() && len > 0 {
            return Err(Fail(SbStatus::NullPointer, "data is null".into()));
        }
        let values = if len == 0 { Vec::new() } else { std::slice::from_raw_parts(data, len).to_vec() };
        *out = boxed(Video::new([c, t, h, w], values)?);
        Ok(())
    })
}

/// Writes `[C, T, H, W]` into `dims`.
///
/// # Safety
/// `video` must come from this library; `dims` must hold four values.
#[no_mangle]
pub unsafe extern "C" fn sb_video_dims(video: *const SbVideo, dims: *mut usize) -> SbStatus {
    guard(|| {
        let v = borrow(video, "video")?;
        if dims.is_null() {
            return Err(Fail(SbStatus::NullPointer, "dims is null".into()));
        }
        std::slice::from_raw_parts_mut(dims, 4).copy_from_slice(&v.0.dims());
        Ok(())
    })
}

/// Read-only view of the values in C, T, H, W order; valid while the
/// video lives. Null for a null handle.
///
/// # Safety
/// `video` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn sb_video_data(video: *const SbVideo) -> *const f32 {
    video.as_ref().map_or(ptr::null(), |v| v.0.data().as_ptr())
}

/// # Safety
/// `video` must be null or come from this library, and not be used again.
#[no_mangle]
pub unsafe extern "C" fn sb_video_free(video: *mut SbVideo) {
    if !video.is_null() {
        drop(Box::from_raw(video));
    }
}

/// Pastes the masked foreground of `video` onto the one-frame background
/// `bg`. `mask` has one channel with values exactly 0 or 1.
///
/// # Safety
/// All handles must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_composite(
    video: *const SbVideo,
    mask: *const SbVideo,
    bg: *const SbVideo,
    out: *mut *mut SbVideo,
) -> SbStatus {
    guard(|| {
        let (v, m, b) = (borrow(video, "video")?, borrow(mask, "mask")?, borrow(bg, "bg")?);
        let out = out_ptr(out, "out")?;
        let masks = MaskSequence::new(m.0.clone())?;
        *out = boxed(composite(&v.0, &masks, &b.0)?);
        Ok(())
    })
}

/// `lambda * video + (1 - lambda) * frame` with `frame` tiled over time.
///
/// # Safety
/// All handles must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_stillmix(
    video: *const SbVideo,
    frame: *const SbVideo,
    lambda: f64,
    out: *mut *mut SbVideo,
) -> SbStatus {
    guard(|| {
        let (v, f) = (borrow(video, "video")?, borrow(frame, "frame")?);
        let out = out_ptr(out, "out")?;
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Fail(SbStatus::Config, format!("lambda = {lambda} is outside [0, 1]")));
        }
        *out = boxed(stillmix_with(&v.0, &f.0, lambda)?);
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_video_read_sbvd(path: *const c_char, out: *mut *mut SbVideo) -> SbStatus {
    guard(|| {
        let path = PathBuf::from(string_arg(path, "path")?);
        let out = out_ptr(out, "out")?;
        *out = boxed(read_sbvd(&path)?);
        Ok(())
    })
}

/// # Safety
/// `video` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sb_video_write_sbvd(video: *const SbVideo, path: *const c_char) -> SbStatus {
    guard(|| {
        let v = borrow(video, "video")?;
        let path = PathBuf::from(string_arg(path, "path")?);
        write_sbvd(&path, &v.0)?;
        Ok(())
    })
}

/// Runs the full pipeline for a JSON config and returns the report as
/// JSON. Release the string with [`sb_string_free`].
///
/// # Safety
/// `config_json` must be NUL-terminated; `report_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_run_experiment(config_json: *const c_char, report_json: *mut *mut c_char) -> SbStatus {
    guard(|| {
        let text = string_arg(config_json, "config_json")?;
        let out = out_ptr(report_json, "report_json")?;
        let config: ExperimentConfig = serde_json::from_str(&text).map_err(Error::from)?;
        let report = run_experiment(config)?;
        let json = serde_json::to_string(&report).map_err(Error::from)?;
        *out = CString::new(json).map_err(|e| Fail(SbStatus::Other, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn sb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
