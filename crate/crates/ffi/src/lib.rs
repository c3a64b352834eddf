//! C ABI over the `smem` library.
//!
//! Every fallible function returns an `SmemStatus`. On failure the message
//! is available from `smem_last_error` on the same thread until the next
//! failing call. Results are written through out-pointers, which are left
//! untouched on failure.
//!
//! Models and experiment results are opaque handles owned by the caller and
//! released with the matching `_free` function. Handles are not thread-safe
//! for concurrent mutation, but `smem_model_predict` only reads.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use smem::acquisition::{score, select_top_b, AcquisitionConfig, OutputTriple, ScoredSample, Strategy};
use smem::cli::{parse_spec, run};
use smem::dataset::vqa_accuracy;
use smem::model::{init_model, load_parameters, predict, save_parameters, ModelConfig, Parameters};
use smem::probmath::{entropy, jsd, kl_div_with, normalize, Distribution, KlMode, RawOutput};
use smem::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmemStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Bad lengths, shapes, ids or probability vectors.
    InvalidArgument = 3,
    /// Spec text, strategy name or configuration rejected.
    InvalidConfig = 4,
    /// All-zero output or NaN score.
    Numeric = 5,
    Io = 6,
    /// A Rust panic was caught at the boundary. Indicates a bug.
    Panic = 7,
}

/// Hyper-parameters for `smem_score`. Obtain defaults from
/// `smem_acquisition_params_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmemAcquisitionParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Use epsilon-smoothed KL instead of returning +inf on support mismatch.
    pub smoothed_kl: bool,
}

/// Trained or freshly initialized tri-branch model.
pub struct SmemModel {
    params: Parameters,
}

/// Outcome of `smem_run_spec`: the aggregate CSV text.
pub struct SmemRun {
    csv: CString,
    rows: usize,
}

struct Failure {
    status: SmemStatus,
    message: String,
}

impl Failure {
    fn new(status: SmemStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Parse(_) | Error::Validation(_) | Error::UnknownStrategy(_) | Error::Schema(_) => {
                SmemStatus::InvalidConfig
            }
            Error::AllZeroOutput | Error::NanScore(_) => SmemStatus::Numeric,
            Error::Io(_) => SmemStatus::Io,
            _ => SmemStatus::InvalidArgument,
        };
        Self::new(status, e.to_string())
    }
}

type FfiResult<T> = Result<T, Failure>;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> FfiResult<()>) -> SmemStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SmemStatus::Ok,
        Ok(Err(fail)) => {
            set_last_error(&fail.message);
            fail.status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("internal error: {msg}"));
            SmemStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::new(SmemStatus::NullPointer, format!("`{name}` is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, name: &str) -> FfiResult<&'a mut [T]> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::new(SmemStatus::NullPointer, format!("`{name}` is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> FfiResult<&'a mut T> {
    p.as_mut()
        .ok_or_else(|| Failure::new(SmemStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn string<'a>(p: *const c_char, name: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(Failure::new(SmemStatus::NullPointer, format!("`{name}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(SmemStatus::InvalidUtf8, format!("`{name}` is not UTF-8")))
}

unsafe fn distribution(p: *const f64, k: usize, name: &str) -> FfiResult<Distribution> {
    Ok(Distribution::new(slice(p, k, name)?.to_vec())?)
}

unsafe fn raw_output(p: *const f64, k: usize, name: &str) -> FfiResult<RawOutput> {
    Ok(RawOutput::new(slice(p, k, name)?.to_vec())?)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn smem_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the most recent failure on this thread, or "" if none.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn smem_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn smem_acquisition_params_default() -> SmemAcquisitionParams {
    let d = AcquisitionConfig::default();
    SmemAcquisitionParams {
        alpha: d.alpha,
        beta: d.beta,
        gamma: d.gamma,
        smoothed_kl: d.kl_mode == KlMode::Smoothed,
    }
}

/// Sum-normalizes `k` raw outputs in `[0, 1]` into `out`.
///
/// # Safety
/// `raw` must point to `k` readable doubles and `out` to `k` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn smem_normalize(raw: *const f64, k: usize, out: *mut f64) -> SmemStatus {
    guard(|| {
        let d = normalize(&raw_output(raw, k, "raw")?)?;
        slice_mut(out, k, "out")?.copy_from_slice(d.as_slice());
        Ok(())
    })
}

/// Shannon entropy (nats) of a probability vector.
///
/// # Safety
/// `p` must point to `k` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn smem_entropy(p: *const f64, k: usize, out: *mut f64) -> SmemStatus {
    guard(|| {
        let h = entropy(&distribution(p, k, "p")?);
        *self::out(out, "out")? = h;
        Ok(())
    })
}

/// `KL(p || q)`. Without smoothing the result is +inf when `q` misses
/// support of `p`.
///
/// # Safety
/// `p` and `q` must point to `k` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn smem_kl_div(p: *const f64, q: *const f64, k: usize, smoothed: bool, out: *mut f64) -> SmemStatus {
    guard(|| {
        let mode = if smoothed { KlMode::Smoothed } else { KlMode::Infinite };
        let v = kl_div_with(&distribution(p, k, "p")?, &distribution(q, k, "q")?, mode)?;
        *self::out(out, "out")? = v;
        Ok(())
    })
}

/// Jensen-Shannon divergence (nats), in `[0, ln 2]`.
///
/// # Safety
/// `p` and `q` must point to `k` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn smem_jsd(p: *const f64, q: *const f64, k: usize, out: *mut f64) -> SmemStatus {
    guard(|| {
        let v = jsd(&distribution(p, k, "p")?, &distribution(q, k, "q")?)?;
        *self::out(out, "out")? = v;
        Ok(())
    })
}

/// Scores one sample from its raw main, visual and question head outputs.
/// `strategy` is one of the lowercase strategy names (e.g. "smem_full").
/// `params` may be null for defaults. `seed` only affects "random".
///
/// # Safety
/// `strategy` must be a NUL-terminated string; `main`, `visual` and
/// `question` must point to `k` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn smem_score(
    strategy: *const c_char,
    main: *const f64,
    visual: *const f64,
    question: *const f64,
    k: usize,
    sample_id: u64,
    seed: u64,
    params: *const SmemAcquisitionParams,
    out: *mut f64,
) -> SmemStatus {
    guard(|| {
        let strategy: Strategy = string(strategy, "strategy")?.parse()?;
        let p = params.as_ref().copied().unwrap_or_else(|| smem_acquisition_params_default());
        let cfg = AcquisitionConfig {
            alpha: p.alpha,
            beta: p.beta,
            gamma: p.gamma,
            strategy,
            kl_mode: if p.smoothed_kl { KlMode::Smoothed } else { KlMode::Infinite },
        };
        cfg.validate()?;
        let t = OutputTriple::new(raw_output(main, k, "main")?, raw_output(visual, k, "visual")?, raw_output(question, k, "question")?)?;
        *self::out(out, "out")? = score(&t, sample_id, &cfg, seed)?;
        Ok(())
    })
}

/// Writes the `b` ids with the highest scores to `out_ids`, ordered by
/// descending score then ascending id.
///
/// # Safety
/// `ids` and `scores` must point to `n` readable elements; `out_ids` must
/// have room for `b` ids.
#[no_mangle]
pub unsafe extern "C" fn smem_select_top_b(
    ids: *const u64,
    scores: *const f64,
    n: usize,
    b: usize,
    out_ids: *mut u64,
) -> SmemStatus {
    guard(|| {
        let scored: Vec<ScoredSample> = slice(ids, n, "ids")?
            .iter()
            .zip(slice(scores, n, "scores")?)
            .map(|(&sample_id, &score)| ScoredSample { sample_id, score })
            .collect();
        let top = select_top_b(&scored, b)?;
        slice_mut(out_ids, b, "out_ids")?.copy_from_slice(&top);
        Ok(())
    })
}

/// `min(counts[predicted] / 3, 1)`.
///
/// # Safety
/// `counts` must point to `k` readable integers; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn smem_vqa_accuracy(predicted: usize, counts: *const u32, k: usize, out: *mut f64) -> SmemStatus {
    guard(|| {
        *self::out(out, "out")? = vqa_accuracy(predicted, slice(counts, k, "counts")?)?;
        Ok(())
    })
}

/// Creates a freshly initialized model. Free with `smem_model_free`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn smem_model_new(
    dim_v: usize,
    dim_q: usize,
    hidden: usize,
    num_classes: usize,
    seed: u64,
    out: *mut *mut SmemModel,
) -> SmemStatus {
    guard(|| {
        let slot = self::out(out, "out")?;
        let params = init_model(&ModelConfig {
            dim_v,
            dim_q,
            hidden,
            num_classes,
            lambda: 0.0,
            seed,
        })?;
        *slot = Box::into_raw(Box::new(SmemModel { params }));
        Ok(())
    })
}

/// Loads a model from a parameter checkpoint file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn smem_model_load(path: *const c_char, out: *mut *mut SmemModel) -> SmemStatus {
    guard(|| {
        let slot = self::out(out, "out")?;
        let params = load_parameters(&PathBuf::from(string(path, "path")?))?;
        *slot = Box::into_raw(Box::new(SmemModel { params }));
        Ok(())
    })
}

/// Writes the model's parameters to a checkpoint file.
///
/// # Safety
/// `model` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn smem_model_save(model: *const SmemModel, path: *const c_char) -> SmemStatus {
    guard(|| {
        let m = model
            .as_ref()
            .ok_or_else(|| Failure::new(SmemStatus::NullPointer, "`model` is null"))?;
        save_parameters(&m.params, &PathBuf::from(string(path, "path")?))?;
        Ok(())
    })
}

/// Reports the model's input widths, hidden width and class count. Any
/// out-pointer may be null.
///
/// # Safety
/// `model` must be a live handle; non-null out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn smem_model_dims(
    model: *const SmemModel,
    dim_v: *mut usize,
    dim_q: *mut usize,
    hidden: *mut usize,
    num_classes: *mut usize,
) -> SmemStatus {
    guard(|| {
        let p = &model
            .as_ref()
            .ok_or_else(|| Failure::new(SmemStatus::NullPointer, "`model` is null"))?
            .params;
        for (slot, v) in [
            (dim_v, p.dim_v()),
            (dim_q, p.dim_q()),
            (hidden, p.hidden()),
            (num_classes, p.num_classes()),
        ] {
            if let Some(s) = slot.as_mut() {
                *s = v;
            }
        }
        Ok(())
    })
}

/// Runs the forward pass and writes the three sigmoid output vectors.
/// Any of `main`, `visual`, `question` may be null to skip that head.
///
/// # Safety
/// `model` must be a live handle; `x_v` and `x_q` must point to `dim_v` and
/// `dim_q` readable doubles; non-null outputs must have room for `k` doubles.
#[no_mangle]
pub unsafe extern "C" fn smem_model_predict(
    model: *const SmemModel,
    x_v: *const f64,
    dim_v: usize,
    x_q: *const f64,
    dim_q: usize,
    main: *mut f64,
    visual: *mut f64,
    question: *mut f64,
    k: usize,
) -> SmemStatus {
    guard(|| {
        let m = model
            .as_ref()
            .ok_or_else(|| Failure::new(SmemStatus::NullPointer, "`model` is null"))?;
        if k != m.params.num_classes() {
            return Err(Error::ShapeMismatch {
                what: "output buffer",
                expected: m.params.num_classes(),
                got: k,
            }
            .into());
        }
        let t = predict(&m.params, slice(x_v, dim_v, "x_v")?, slice(x_q, dim_q, "x_q")?)?;
        for (dst, src) in [(main, &t.main), (visual, &t.visual), (question, &t.question)] {
            if !dst.is_null() {
                slice_mut(dst, k, "output")?.copy_from_slice(src.as_slice());
            }
        }
        Ok(())
    })
}

/// Releases a model handle. Null is a no-op.
///
/// # Safety
/// `model` must come from `smem_model_new`/`smem_model_load` and not have
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn smem_model_free(model: *mut SmemModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Runs an experiment grid from TOML spec text. `output_dir` overrides the
/// spec's output directory when non-null. Free with `smem_run_free`.
///
/// # Safety
/// `spec_toml` and non-null `output_dir` must be NUL-terminated strings;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn smem_run_spec(
    spec_toml: *const c_char,
    output_dir: *const c_char,
    workers: usize,
    out: *mut *mut SmemRun,
) -> SmemStatus {
    guard(|| {
        let slot = self::out(out, "out")?;
        let mut spec = parse_spec(string(spec_toml, "spec_toml")?)?;
        if !output_dir.is_null() {
            spec.output_dir = PathBuf::from(string(output_dir, "output_dir")?);
        }
        let table = run(&spec, workers)?;
        let csv = CString::new(table.to_csv()).map_err(|e| Failure::new(SmemStatus::InvalidArgument, e.to_string()))?;
        *slot = Box::into_raw(Box::new(SmemRun {
            csv,
            rows: table.rows.len(),
        }));
        Ok(())
    })
}

/// Aggregate CSV text of a finished run; owned by the handle.
///
/// # Safety
/// `run` must be a live handle or null (returns null).
#[no_mangle]
pub unsafe extern "C" fn smem_run_csv(run: *const SmemRun) -> *const c_char {
    run.as_ref().map_or(ptr::null(), |r| r.csv.as_ptr())
}

/// Number of data rows in the aggregate CSV.
///
/// # Safety
/// `run` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn smem_run_rows(run: *const SmemRun) -> usize {
    run.as_ref().map_or(0, |r| r.rows)
}

/// Releases a run handle. Null is a no-op.
///
/// # Safety
/// `run` must come from `smem_run_spec` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn smem_run_free(run: *mut SmemRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
