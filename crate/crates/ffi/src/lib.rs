//! C ABI over `aesa-core`: load a checkpoint behind an opaque handle, predict
//! the four aesthetic scores for a layer stack, and compute correlation metrics.
//!
//! Every fallible function returns an [`AesaStatus`]; on failure a description
//! is available from [`aesa_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use aesa_core::features::{load_layer_stack, LayerStack};
use aesa_core::metrics::{ktau, pcc, srcc};
use aesa_core::model::{load_checkpoint, Checkpoint, Mode};
use aesa_core::{AesaError, Axis};
use ndarray::Array3;

/// Number of scores written by the predict functions, in `PQ, PC, CE, CU` order.
pub const AESA_AXIS_COUNT: usize = 4;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AesaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Format = 3,
    Shape = 4,
    Io = 5,
    NonFinite = 6,
    UndefinedMetric = 7,
    Panic = 8,
}

/// Opaque model handle.
pub struct AesaModel {
    checkpoint: Checkpoint,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = text);
}

fn status_of(err: &AesaError) -> AesaStatus {
    match err {
        AesaError::Format(_) | AesaError::Manifest(_) | AesaError::Csv(_) => AesaStatus::Format,
        AesaError::Shape(_) => AesaStatus::Shape,
        AesaError::Io { .. } => AesaStatus::Io,
        AesaError::NonFinite(_) => AesaStatus::NonFinite,
        AesaError::UndefinedCorrelation(_) => AesaStatus::UndefinedMetric,
        _ => AesaStatus::InvalidArgument,
    }
}

struct Failure(AesaStatus, String);

impl From<AesaError> for Failure {
    fn from(err: AesaError) -> Self {
        Failure(status_of(&err), err.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(AesaStatus::NullPointer, format!("`{what}` is null"))
}

/// Runs `body`, recording the error message and mapping panics to `Panic`.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> AesaStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_last_error("");
            AesaStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            AesaStatus::Panic
        }
    }
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, Failure> {
    if path.is_null() {
        return Err(null("path"));
    }
    let text = CStr::from_ptr(path).to_str().map_err(|_| {
        Failure(
            AesaStatus::InvalidArgument,
            "path is not valid UTF-8".into(),
        )
    })?;
    Ok(PathBuf::from(text))
}

unsafe fn model_ref<'a>(model: *const AesaModel) -> Result<&'a AesaModel, Failure> {
    model.as_ref().ok_or_else(|| null("model"))
}

fn predict_into(model: &AesaModel, stack: &LayerStack, out: *mut f64) -> Result<(), Failure> {
    let ckpt = &model.checkpoint;
    let pred = ckpt.params.forward(stack, Mode::Eval)?;
    let mut raw = [0.0; AESA_AXIS_COUNT];
    for axis in Axis::ALL {
        raw[axis.index()] = ckpt.scale.denormalize(pred.clip_scores.get(axis))?;
    }
    // SAFETY: the caller provides room for AESA_AXIS_COUNT doubles.
    unsafe { ptr::copy_nonoverlapping(raw.as_ptr(), out, AESA_AXIS_COUNT) };
    Ok(())
}

/// Load a checkpoint file. On success `*out` owns a handle that must be
/// released with [`aesa_model_free`].
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn aesa_model_load(
    path: *const c_char,
    out: *mut *mut AesaModel,
) -> AesaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let checkpoint = load_checkpoint(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(AesaModel { checkpoint }));
        Ok(())
    })
}

/// Release a handle from [`aesa_model_load`]. Null is ignored.
///
/// # Safety
/// `model` must be null or a live handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn aesa_model_free(model: *mut AesaModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Feature dimension the model expects, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aesa_model_input_dim(model: *const AesaModel) -> usize {
    model
        .as_ref()
        .map_or(0, |m| m.checkpoint.params.config.input_dim)
}

/// Number of frontend layers the model fuses, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aesa_model_layer_count(model: *const AesaModel) -> usize {
    model
        .as_ref()
        .map_or(0, |m| m.checkpoint.params.config.layer_count)
}

/// Predict raw-scale scores for a row-major `layers × frames × dims` float
/// buffer. Writes four values (`PQ, PC, CE, CU`) to `out`.
///
/// # Safety
/// `values` must point to `layers * frames * dims` floats and `out` to room for
/// [`AESA_AXIS_COUNT`] doubles.
#[no_mangle]
pub unsafe extern "C" fn aesa_model_predict(
    model: *const AesaModel,
    values: *const f32,
    layers: usize,
    frames: usize,
    dims: usize,
    out: *mut f64,
) -> AesaStatus {
    guard(|| {
        let model = model_ref(model)?;
        if values.is_null() {
            return Err(null("values"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let len = layers
            .checked_mul(frames)
            .and_then(|n| n.checked_mul(dims))
            .ok_or_else(|| Failure(AesaStatus::Shape, "stack size overflows".into()))?;
        let data = std::slice::from_raw_parts(values, len);
        let array = Array3::from_shape_vec(
            (layers, frames, dims),
            data.iter().map(|&v| f64::from(v)).collect(),
        )
        .map_err(|e| Failure(AesaStatus::Shape, e.to_string()))?;
        let stack = LayerStack::new(array, "ffi")?;
        predict_into(model, &stack, out)
    })
}

/// Predict raw-scale scores for a layer-stack file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` point to room for
/// [`AESA_AXIS_COUNT`] doubles.
#[no_mangle]
pub unsafe extern "C" fn aesa_model_predict_file(
    model: *const AesaModel,
    path: *const c_char,
    out: *mut f64,
) -> AesaStatus {
    guard(|| {
        let model = model_ref(model)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let stack = load_layer_stack(path_arg(path)?)?;
        predict_into(model, &stack, out)
    })
}

type Metric = fn(&[f64], &[f64]) -> aesa_core::Result<f64>;

unsafe fn metric(
    metric: Metric,
    x: *const f64,
    y: *const f64,
    n: usize,
    out: *mut f64,
) -> AesaStatus {
    guard(|| {
        if x.is_null() || y.is_null() {
            return Err(null("x/y"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let (xs, ys) = (
            std::slice::from_raw_parts(x, n),
            std::slice::from_raw_parts(y, n),
        );
        *out = metric(xs, ys)?;
        Ok(())
    })
}

/// Pearson correlation of two length-`n` arrays.
///
/// # Safety
/// `x` and `y` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aesa_metric_pcc(
    x: *const f64,
    y: *const f64,
    n: usize,
    out: *mut f64,
) -> AesaStatus {
    metric(pcc, x, y, n, out)
}

/// Spearman correlation with average ranks for ties.
///
/// # Safety
/// Same contract as [`aesa_metric_pcc`].
#[no_mangle]
pub unsafe extern "C" fn aesa_metric_srcc(
    x: *const f64,
    y: *const f64,
    n: usize,
    out: *mut f64,
) -> AesaStatus {
    metric(srcc, x, y, n, out)
}

/// Kendall tau-b.
///
/// # Safety
/// Same contract as [`aesa_metric_pcc`].
#[no_mangle]
pub unsafe extern "C" fn aesa_metric_ktau(
    x: *const f64,
    y: *const f64,
    n: usize,
    out: *mut f64,
) -> AesaStatus {
    metric(ktau, x, y, n, out)
}

/// Message for the most recent failure on this thread; empty after a success.
/// The pointer stays valid until the next `aesa_*` call on the same thread.
#[no_mangle]
pub extern "C" fn aesa_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Static name of axis `index` (`0..4` → `PQ, PC, CE, CU`), or null.
#[no_mangle]
pub extern "C" fn aesa_axis_name(index: usize) -> *const c_char {
    match index {
        0 => c"PQ".as_ptr(),
        1 => c"PC".as_ptr(),
        2 => c"CE".as_ptr(),
        3 => c"CU".as_ptr(),
        _ => ptr::null(),
    }
}
