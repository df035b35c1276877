//! C ABI for the temporal U-Net: opaque model handles, error codes, and
//! flat-buffer predict/save/load calls so other languages can bind.
//!
//! Conventions:
//! - Every fallible call returns a [`TunetStatus`]; `TUNET_STATUS_OK` is 0.
//! - `tunet_last_error` returns a message for the most recent failure on the
//!   calling thread.
//! - Buffers are caller-allocated; lengths are validated before writing.
//! - Handles come from `tunet_model_*` constructors and must be released
//!   with `tunet_model_free`.

#![allow(clippy::needless_range_loop)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use tunet_core::checkpoint::{load_checkpoint, save_checkpoint};
use tunet_core::dataset::NormStats;
use tunet_core::model::{build, predict, ParamStore, TUnetConfig};
use tunet_core::tensor::Tensor3;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TunetStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidConfig = 2,
    Io = 3,
    BadCheckpoint = 4,
    ShapeMismatch = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized: Vec<u8> = msg.bytes().filter(|&b| b != 0).collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &tunet_core::Error) -> TunetStatus {
    use tunet_core::Error as E;
    match err {
        E::InvalidConfig(_) => TunetStatus::InvalidConfig,
        E::Io(_) => TunetStatus::Io,
        E::Checkpoint(_) | E::CheckpointVersion(_) | E::ChecksumMismatch { .. } => {
            TunetStatus::BadCheckpoint
        }
        _ => TunetStatus::ShapeMismatch,
    }
}

/// Opaque model handle: architecture, parameters, and the normalization
/// statistics the checkpoint carried (if any).
pub struct TunetModel {
    config: TUnetConfig,
    params: ParamStore<f32>,
    norm: Option<NormStats>,
}

/// Architecture description for `tunet_model_new`.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct TunetConfig {
    pub input_channels: usize,
    pub series_length: usize,
    pub num_classes: usize,
    pub depth: usize,
    pub base_channels: usize,
    pub conv_kernel: usize,
    pub seed: u64,
}

fn to_core(config: &TunetConfig) -> TUnetConfig {
    TUnetConfig {
        input_channels: config.input_channels,
        series_length: config.series_length,
        num_classes: config.num_classes,
        depth: config.depth,
        base_channels: config.base_channels,
        conv_kernel: config.conv_kernel,
        seed: config.seed,
    }
}

fn guard(f: impl FnOnce() -> TunetStatus) -> TunetStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            TunetStatus::Panic
        }
    }
}

/// Build a freshly initialized model from an architecture description.
///
/// # Safety
/// `config` and `out` must be valid, non-null pointers.
#[no_mangle]
pub unsafe extern "C" fn tunet_model_new(
    config: *const TunetConfig,
    out: *mut *mut TunetModel,
) -> TunetStatus {
    guard(|| {
        if config.is_null() || out.is_null() {
            set_error("null argument");
            return TunetStatus::NullArgument;
        }
        let cfg = to_core(&*config);
        match build::<f32>(&cfg) {
            Ok(params) => {
                *out = Box::into_raw(Box::new(TunetModel {
                    config: cfg,
                    params,
                    norm: None,
                }));
                TunetStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

fn path_from(ptr: *const c_char) -> Result<std::path::PathBuf, TunetStatus> {
    if ptr.is_null() {
        set_error("null path");
        return Err(TunetStatus::NullArgument);
    }
    let s = unsafe { CStr::from_ptr(ptr) };
    match s.to_str() {
        Ok(p) => Ok(Path::new(p).to_path_buf()),
        Err(_) => {
            set_error("path is not valid UTF-8");
            Err(TunetStatus::InvalidConfig)
        }
    }
}

/// Load a model (and any stored normalization statistics) from a checkpoint.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` non-null.
#[no_mangle]
pub unsafe extern "C" fn tunet_model_load(
    path: *const c_char,
    out: *mut *mut TunetModel,
) -> TunetStatus {
    guard(|| {
        if out.is_null() {
            set_error("null argument");
            return TunetStatus::NullArgument;
        }
        let path = match path_from(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match load_checkpoint::<f32>(&path) {
            Ok((params, config, norm)) => {
                *out = Box::into_raw(Box::new(TunetModel {
                    config,
                    params,
                    norm,
                }));
                TunetStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Save the model to a checkpoint file.
///
/// # Safety
/// `model` must be a live handle; `path` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tunet_model_save(
    model: *const TunetModel,
    path: *const c_char,
) -> TunetStatus {
    guard(|| {
        if model.is_null() {
            set_error("null model");
            return TunetStatus::NullArgument;
        }
        let path = match path_from(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let m = &*model;
        match save_checkpoint(&m.params, &m.config, m.norm.as_ref(), &path) {
            Ok(()) => TunetStatus::Ok,
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Release a model handle. Null is a no-op.
///
/// # Safety
/// `model` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn tunet_model_free(model: *mut TunetModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of time samples the model consumes per series (0 on null).
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tunet_model_series_length(model: *const TunetModel) -> usize {
    if model.is_null() {
        return 0;
    }
    (*model).config.series_length
}

/// Input channels (CSI carriers) per sample (0 on null).
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tunet_model_input_channels(model: *const TunetModel) -> usize {
    if model.is_null() {
        return 0;
    }
    (*model).config.input_channels
}

/// Output classes (0 on null).
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tunet_model_num_classes(model: *const TunetModel) -> usize {
    if model.is_null() {
        return 0;
    }
    (*model).config.num_classes
}

/// Label every sample of one series.
///
/// `input` holds `input_channels * series_length` raw values in (channel,
/// time) row-major order; the model's stored normalization statistics are
/// applied when present. `confidences` receives `num_classes *
/// series_length` per-class probabilities in (class, time) order and
/// `labels` receives `series_length` argmax class ids.
///
/// # Safety
/// All pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn tunet_predict(
    model: *const TunetModel,
    input: *const f32,
    input_len: usize,
    confidences: *mut f32,
    confidences_len: usize,
    labels: *mut u32,
    labels_len: usize,
) -> TunetStatus {
    guard(|| {
        if model.is_null() || input.is_null() || confidences.is_null() || labels.is_null() {
            set_error("null argument");
            return TunetStatus::NullArgument;
        }
        let m = &*model;
        let (channels, length, classes) = (
            m.config.input_channels,
            m.config.series_length,
            m.config.num_classes,
        );
        if input_len != channels * length {
            set_error("input length does not match input_channels * series_length");
            return TunetStatus::ShapeMismatch;
        }
        if confidences_len < classes * length {
            set_error("confidence buffer smaller than num_classes * series_length");
            return TunetStatus::BufferTooSmall;
        }
        if labels_len < length {
            set_error("label buffer smaller than series_length");
            return TunetStatus::BufferTooSmall;
        }

        let raw = std::slice::from_raw_parts(input, input_len);
        let mut x = Tensor3::<f32>::zeros(1, channels, length);
        for c in 0..channels {
            let row = x.row_mut(0, c);
            for (t, slot) in row.iter_mut().enumerate() {
                let mut v = raw[c * length + t] as f64;
                if let Some(stats) = &m.norm {
                    v = (v - stats.mean[c]) / stats.std[c];
                }
                *slot = v as f32;
            }
        }

        match predict(&m.params, x, &m.config) {
            Ok((pred, probs)) => {
                let conf_out = std::slice::from_raw_parts_mut(confidences, confidences_len);
                for c in 0..classes {
                    for t in 0..length {
                        conf_out[c * length + t] = probs.at(0, c, t);
                    }
                }
                let label_out = std::slice::from_raw_parts_mut(labels, labels_len);
                for t in 0..length {
                    label_out[t] = pred.at(0, t) as u32;
                }
                TunetStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Copy the last error message for this thread into `buf` (NUL-terminated,
/// truncated to `cap`). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be valid for `cap` bytes, or null (to query the length).
#[no_mangle]
pub unsafe extern "C" fn tunet_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> TunetConfig {
        TunetConfig {
            input_channels: 4,
            series_length: 16,
            num_classes: 3,
            depth: 2,
            base_channels: 4,
            conv_kernel: 3,
            seed: 9,
        }
    }

    #[test]
    fn create_predict_free() {
        unsafe {
            let mut model: *mut TunetModel = std::ptr::null_mut();
            assert_eq!(tunet_model_new(&tiny(), &mut model), TunetStatus::Ok);
            assert_eq!(tunet_model_series_length(model), 16);
            assert_eq!(tunet_model_num_classes(model), 3);

            let input = vec![0.25f32; 4 * 16];
            let mut conf = vec![0.0f32; 3 * 16];
            let mut labels = vec![0u32; 16];
            let status = tunet_predict(
                model,
                input.as_ptr(),
                input.len(),
                conf.as_mut_ptr(),
                conf.len(),
                labels.as_mut_ptr(),
                labels.len(),
            );
            assert_eq!(status, TunetStatus::Ok);
            for t in 0..16 {
                let total: f32 = (0..3).map(|c| conf[c * 16 + t]).sum();
                assert!((total - 1.0).abs() < 1e-4);
                assert!((labels[t] as usize) < 3);
            }
            tunet_model_free(model);
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let c_path = CString::new(path.to_str().unwrap()).unwrap();
        unsafe {
            let mut model: *mut TunetModel = std::ptr::null_mut();
            assert_eq!(tunet_model_new(&tiny(), &mut model), TunetStatus::Ok);
            assert_eq!(tunet_model_save(model, c_path.as_ptr()), TunetStatus::Ok);

            let mut loaded: *mut TunetModel = std::ptr::null_mut();
            assert_eq!(tunet_model_load(c_path.as_ptr(), &mut loaded), TunetStatus::Ok);
            assert_eq!((*loaded).params, (*model).params);
            tunet_model_free(model);
            tunet_model_free(loaded);
        }
    }

    #[test]
    fn errors_set_status_and_message() {
        unsafe {
            // Null output pointer.
            assert_eq!(
                tunet_model_new(&tiny(), std::ptr::null_mut()),
                TunetStatus::NullArgument
            );

            // Invalid architecture: series length not divisible by 2^depth.
            let mut bad = tiny();
            bad.series_length = 15;
            let mut model: *mut TunetModel = std::ptr::null_mut();
            assert_eq!(tunet_model_new(&bad, &mut model), TunetStatus::InvalidConfig);
            let mut buf = vec![0i8; 256];
            let n = tunet_last_error(buf.as_mut_ptr() as *mut c_char, buf.len());
            assert!(n > 0);

            // Missing checkpoint file.
            let c_path = CString::new("/nonexistent/m.ckpt").unwrap();
            let mut loaded: *mut TunetModel = std::ptr::null_mut();
            assert_eq!(
                tunet_model_load(c_path.as_ptr(), &mut loaded),
                TunetStatus::Io
            );

            // Wrong input length.
            assert_eq!(tunet_model_new(&tiny(), &mut model), TunetStatus::Ok);
            let input = [0.0f32; 7];
            let mut conf = vec![0.0f32; 3 * 16];
            let mut labels = vec![0u32; 16];
            assert_eq!(
                tunet_predict(
                    model,
                    input.as_ptr(),
                    input.len(),
                    conf.as_mut_ptr(),
                    conf.len(),
                    labels.as_mut_ptr(),
                    labels.len(),
                ),
                TunetStatus::ShapeMismatch
            );
            // Undersized confidence buffer.
            let input = vec![0.0f32; 4 * 16];
            let mut small = vec![0.0f32; 5];
            assert_eq!(
                tunet_predict(
                    model,
                    input.as_ptr(),
                    input.len(),
                    small.as_mut_ptr(),
                    small.len(),
                    labels.as_mut_ptr(),
                    labels.len(),
                ),
                TunetStatus::BufferTooSmall
            );
            tunet_model_free(model);
        }
    }
}
