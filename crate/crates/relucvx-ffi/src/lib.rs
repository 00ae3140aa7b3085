//! C ABI for training and evaluating convex two-layer ReLU networks.
//!
//! Datasets and models are opaque handles owned by the caller and released
//! with the matching `_free` function. Fallible calls return a
//! [`RelucvxStatus`] code; the message of the most recent failure on the
//! calling thread is available from [`relucvx_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use relucvx::attacks::{evaluate, AttackConfig, AttackKind};
use relucvx::model::forward_row;
use relucvx::patterns::SamplerConfig;
use relucvx::solver::SolveSettings;
use relucvx::trainer::{train_adversarial, train_standard, RunStatus, TrainedModel};
use relucvx::{Dataset, Error, LossKind, Matrix, Task};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelucvxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    TooLarge = 4,
    Solver = 5,
    Divergence = 6,
    Serialization = 7,
    Panic = 8,
}

pub const RELUCVX_TASK_BINARY: u32 = 0;
pub const RELUCVX_TASK_REGRESSION: u32 = 1;

pub const RELUCVX_LOSS_HINGE: u32 = 0;
pub const RELUCVX_LOSS_SQUARED: u32 = 1;

pub const RELUCVX_BIAS_NONE: u32 = 0;
pub const RELUCVX_BIAS_PERTURBED: u32 = 1;
pub const RELUCVX_BIAS_FROZEN: u32 = 2;

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RelucvxTrainOptions {
    /// Nonzero selects the robust program at radius `eps`.
    pub adversarial: u32,
    pub loss: u32,
    pub beta: f64,
    pub eps: f64,
    pub ps: usize,
    pub pa: usize,
    pub s: usize,
    pub seed: u64,
    pub tol_gap: f64,
    pub tol_feas: f64,
    pub max_iter: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RelucvxEvaluation {
    /// Accuracy for binary tasks, mean squared error for regression.
    pub clean: f64,
    pub fgsm: f64,
    pub pgd: f64,
    pub clean_loss: f64,
    pub pgd_loss: f64,
}

pub struct RelucvxDataset(Dataset);

pub struct RelucvxModel(TrainedModel);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn code(err: &Error) -> RelucvxStatus {
    match err {
        Error::Dimension(_) => RelucvxStatus::Dimension,
        Error::InvalidArgument(_) | Error::InvalidData(_) => RelucvxStatus::InvalidArgument,
        Error::TooLarge(_) => RelucvxStatus::TooLarge,
        Error::MalformedProgram(_) | Error::Solver { .. } | Error::ConstraintViolation(_) => RelucvxStatus::Solver,
        Error::Divergence(_) => RelucvxStatus::Divergence,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => RelucvxStatus::Serialization,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RelucvxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RelucvxStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(&format!("null pointer: {what}"));
            RelucvxStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(&e.to_string());
            code(&e)
        }
        Err(_) => {
            set_error("internal panic");
            RelucvxStatus::Panic
        }
    }
}

unsafe fn reference<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn checked_len(n: usize, d: usize) -> Result<usize, Failure> {
    n.checked_mul(d)
        .ok_or_else(|| Failure::Lib(Error::TooLarge(format!("{n}x{d} values overflow"))))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn relucvx_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty when none failed.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn relucvx_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Fills `out` with hinge loss, β = 1e-4, P_s = P_a = 120, S = 10, seed 0
/// and the default solver tolerances.
///
/// # Safety
/// `out` must be null or point to writable memory for one options struct.
#[no_mangle]
pub unsafe extern "C" fn relucvx_train_options_default(out: *mut RelucvxTrainOptions) -> RelucvxStatus {
    guard(|| {
        let out = out.as_mut().ok_or(Failure::Null("out"))?;
        let settings = SolveSettings::default();
        *out = RelucvxTrainOptions {
            adversarial: 0,
            loss: RELUCVX_LOSS_HINGE,
            beta: 1e-4,
            eps: 0.0,
            ps: 120,
            pa: 120,
            s: 10,
            seed: 0,
            tol_gap: settings.tol_gap,
            tol_feas: settings.tol_feas,
            max_iter: settings.max_iter,
        };
        Ok(())
    })
}

/// Copies a row-major n×d matrix and n labels into a new dataset. Binary
/// labels must be ±1. With `bias` perturbed or frozen a column of ones is
/// appended; a frozen column is never moved by adversaries.
///
/// # Safety
/// `x` must point to n·d doubles, `y` to n doubles and `out` to a writable
/// handle slot.
#[no_mangle]
pub unsafe extern "C" fn relucvx_dataset_new(
    x: *const f64,
    n: usize,
    d: usize,
    y: *const f64,
    task: u32,
    bias: u32,
    out: *mut *mut RelucvxDataset,
) -> RelucvxStatus {
    guard(|| {
        let out = out.as_mut().ok_or(Failure::Null("out"))?;
        *out = ptr::null_mut();
        let xs = slice(x, checked_len(n, d)?, "x")?;
        let ys = slice(y, n, "y")?;
        let task = match task {
            RELUCVX_TASK_BINARY => Task::Binary,
            RELUCVX_TASK_REGRESSION => Task::Regression,
            t => return Err(Error::InvalidArgument(format!("unknown task {t}")).into()),
        };
        let data = Dataset::new(Matrix::from_vec(n, d, xs.to_vec())?, ys.to_vec(), task)?;
        let data = match bias {
            RELUCVX_BIAS_NONE => data,
            RELUCVX_BIAS_PERTURBED => data.with_bias(false),
            RELUCVX_BIAS_FROZEN => data.with_bias(true),
            b => return Err(Error::InvalidArgument(format!("unknown bias mode {b}")).into()),
        };
        *out = Box::into_raw(Box::new(RelucvxDataset(data)));
        Ok(())
    })
}

/// # Safety
/// `data` must be null or a handle from [`relucvx_dataset_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn relucvx_dataset_free(data: *mut RelucvxDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Row count, or 0 for a null handle.
///
/// # Safety
/// `data` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn relucvx_dataset_rows(data: *const RelucvxDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.n())
}

/// Column count including any bias column, or 0 for a null handle.
///
/// # Safety
/// `data` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn relucvx_dataset_cols(data: *const RelucvxDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.d())
}

/// Samples patterns, solves the convex program and recovers a network.
/// A solver that stops before certifying optimality still yields a model;
/// see [`relucvx_model_degraded`].
///
/// # Safety
/// `data` and `options` must be live, `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn relucvx_train(
    data: *const RelucvxDataset,
    options: *const RelucvxTrainOptions,
    out: *mut *mut RelucvxModel,
) -> RelucvxStatus {
    guard(|| {
        let out = out.as_mut().ok_or(Failure::Null("out"))?;
        *out = ptr::null_mut();
        let data = &reference(data, "data")?.0;
        let o = *reference(options, "options")?;
        let loss = match o.loss {
            RELUCVX_LOSS_HINGE => LossKind::HINGE,
            RELUCVX_LOSS_SQUARED => LossKind::Squared,
            l => return Err(Error::InvalidArgument(format!("unknown loss {l}")).into()),
        };
        let settings = SolveSettings {
            tol_gap: o.tol_gap,
            tol_feas: o.tol_feas,
            max_iter: o.max_iter,
            ..SolveSettings::default()
        };
        let model = if o.adversarial != 0 {
            let sampler = SamplerConfig::adversarial(o.ps, o.pa, o.s, o.eps, o.seed);
            train_adversarial(data, o.beta, o.eps, &sampler, loss, &settings)?
        } else {
            train_standard(data, o.beta, &SamplerConfig::standard(o.ps, o.seed), loss, &settings)?
        };
        *out = Box::into_raw(Box::new(RelucvxModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn relucvx_model_free(model: *mut RelucvxModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of recovered hidden neurons, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn relucvx_model_width(model: *const RelucvxModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.weights.width())
}

/// Optimal value reported by the solver, or NaN for a null handle.
///
/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn relucvx_model_objective(model: *const RelucvxModel) -> f64 {
    model.as_ref().map_or(f64::NAN, |m| m.0.meta.solve.objective)
}

/// 1 when the solver stopped before certifying optimality, else 0.
///
/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn relucvx_model_degraded(model: *const RelucvxModel) -> u32 {
    model
        .as_ref()
        .map_or(0, |m| u32::from(m.0.meta.status == RunStatus::Degraded))
}

/// Network outputs ŷ for the n rows of a row-major n×d matrix.
///
/// # Safety
/// `x` must point to n·d doubles and `out` to n writable doubles.
#[no_mangle]
pub unsafe extern "C" fn relucvx_model_predict(
    model: *const RelucvxModel,
    x: *const f64,
    n: usize,
    d: usize,
    out: *mut f64,
) -> RelucvxStatus {
    guard(|| {
        let weights = &reference(model, "model")?.0.weights;
        let xs = slice(x, checked_len(n, d)?, "x")?;
        if n > 0 && out.is_null() {
            return Err(Failure::Null("out"));
        }
        if let Some(input) = weights.input_dim() {
            if input != d {
                return Err(Error::Dimension(format!("model takes {input} inputs, got {d}")).into());
            }
        }
        for k in 0..n {
            *out.add(k) = forward_row(weights, &xs[k * d..(k + 1) * d]);
        }
        Ok(())
    })
}

/// Clean, FGSM and PGD metrics on `data` at radius `eps`, with the loss the
/// model was trained on.
///
/// # Safety
/// `model` and `data` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn relucvx_model_evaluate(
    model: *const RelucvxModel,
    data: *const RelucvxDataset,
    eps: f64,
    out: *mut RelucvxEvaluation,
) -> RelucvxStatus {
    guard(|| {
        let model = &reference(model, "model")?.0;
        let data = &reference(data, "data")?.0;
        let out = out.as_mut().ok_or(Failure::Null("out"))?;
        let e = evaluate(&model.weights, data, &AttackConfig::new(eps, AttackKind::Pgd), model.meta.loss)?;
        *out = RelucvxEvaluation {
            clean: e.clean,
            fgsm: e.fgsm,
            pgd: e.pgd,
            clean_loss: e.clean_loss,
            pgd_loss: e.pgd_loss,
        };
        Ok(())
    })
}

/// Serializes the model with its convex solution and training metadata.
/// The string must be released with [`relucvx_string_free`].
///
/// # Safety
/// `model` must be live and `out` a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn relucvx_model_to_json(model: *const RelucvxModel, out: *mut *mut c_char) -> RelucvxStatus {
    guard(|| {
        let out = out.as_mut().ok_or(Failure::Null("out"))?;
        *out = ptr::null_mut();
        let text = reference(model, "model")?.0.to_json()?;
        let text = CString::new(text).map_err(|e| Error::InvalidData(e.to_string()))?;
        *out = text.into_raw();
        Ok(())
    })
}

/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn relucvx_model_from_json(json: *const c_char, out: *mut *mut RelucvxModel) -> RelucvxStatus {
    guard(|| {
        let out = out.as_mut().ok_or(Failure::Null("out"))?;
        *out = ptr::null_mut();
        if json.is_null() {
            return Err(Failure::Null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Error::InvalidArgument(format!("json is not UTF-8: {e}")))?;
        *out = Box::into_raw(Box::new(RelucvxModel(TrainedModel::from_json(text)?)));
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn relucvx_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
