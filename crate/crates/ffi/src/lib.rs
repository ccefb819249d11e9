// SPDX-License-Identifier: Apache-2.0

//! C ABI over the socialml core.
//!
//! Objects are opaque handles created by `sml_*_new`/`sml_*_load` and
//! released with the matching `sml_*_free`. Every fallible call returns an
//! [`SmlStatus`]; on failure the message is available from
//! [`sml_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use socialml::graph::{
    build_averaging_matrix, directed_ring_adjacency, grid_adjacency, is_strongly_connected, perron_eigenvector,
    CombinationMatrix,
};
use socialml::model::MlpModel;
use socialml::social::{decide, BeliefState, Engine};
use socialml::{theory, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NotPrimitive = 4,
    NoConvergence = 5,
    NonFinite = 6,
    Io = 7,
    Format = 8,
    Panic = 99,
}

impl From<&Error> for SmlStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::DimensionMismatch { .. } => SmlStatus::DimensionMismatch,
            Error::NotPrimitive => SmlStatus::NotPrimitive,
            Error::NoConvergence { .. } => SmlStatus::NoConvergence,
            Error::NonFinite(_) => SmlStatus::NonFinite,
            Error::Io(_) => SmlStatus::Io,
            Error::Format(_) | Error::Json(_) => SmlStatus::Format,
            _ => SmlStatus::InvalidArgument,
        }
    }
}

/// Row-major `K x K` combination matrix; entry `(l, k)` is the weight agent
/// `k` assigns to neighbour `l`.
pub struct SmlCombinationMatrix(CombinationMatrix);

/// Trained per-agent classifier.
pub struct SmlModel(MlpModel);

/// Social-learning belief recursion over a fixed graph.
pub struct SmlBeliefEngine {
    matrix: CombinationMatrix,
    engine: Engine,
    state: BeliefState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(SmlStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(SmlStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SmlStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SmlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SmlStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SmlStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn check_len(expected: usize, actual: usize, what: &str) -> Result<(), Failure> {
    if expected == actual {
        Ok(())
    } else {
        Err(Failure(
            SmlStatus::DimensionMismatch,
            format!("{what}: expected length {expected}, got {actual}"),
        ))
    }
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the most recent failure on this thread, or null if none.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn sml_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a combination matrix from `k * k` row-major weights.
///
/// # Safety
/// `data` must point to `k * k` readable doubles and `out` to a writable
/// handle slot.
#[no_mangle]
pub unsafe extern "C" fn sml_matrix_new(
    data: *const f64,
    k: usize,
    out: *mut *mut SmlCombinationMatrix,
) -> SmlStatus {
    guard(|| {
        let flat = slice(data, k * k, "data")?;
        let rows = flat.chunks(k.max(1)).map(<[f64]>::to_vec).collect();
        emit(out, SmlCombinationMatrix(CombinationMatrix::from_rows(rows)?))
    })
}

/// Averaging matrix over a directed ring of `k` agents with self-loops.
///
/// # Safety
/// `out` must point to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn sml_matrix_ring(k: usize, out: *mut *mut SmlCombinationMatrix) -> SmlStatus {
    guard(|| emit(out, SmlCombinationMatrix(build_averaging_matrix(&directed_ring_adjacency(k))?)))
}

/// Averaging matrix over a `rows x cols` grid with self-loops.
///
/// # Safety
/// `out` must point to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn sml_matrix_grid(rows: usize, cols: usize, out: *mut *mut SmlCombinationMatrix) -> SmlStatus {
    guard(|| emit(out, SmlCombinationMatrix(build_averaging_matrix(&grid_adjacency(rows, cols))?)))
}

/// Number of agents, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn sml_matrix_size(m: *const SmlCombinationMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.size())
}

/// Writes whether the matrix is primitive to `out`.
///
/// # Safety
/// `m` must be a live matrix handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sml_matrix_is_primitive(m: *const SmlCombinationMatrix, out: *mut bool) -> SmlStatus {
    guard(|| {
        let m = deref(m, "matrix")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = is_strongly_connected(&m.0).primitive;
        Ok(())
    })
}

/// Perron eigenvector, written to `out[0..len]` with `len` equal to the
/// matrix size.
///
/// # Safety
/// `m` must be a live matrix handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sml_matrix_perron(
    m: *const SmlCombinationMatrix,
    tol: f64,
    out: *mut f64,
    len: usize,
) -> SmlStatus {
    guard(|| {
        let m = deref(m, "matrix")?;
        check_len(m.0.size(), len, "perron output")?;
        let pi = perron_eigenvector(&m.0, tol)?;
        slice_mut(out, len, "out")?.copy_from_slice(pi.as_slice());
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sml_matrix_free(m: *mut SmlCombinationMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Loads a model JSON file written by the `train` command.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn sml_model_load(path: *const c_char, out: *mut *mut SmlModel) -> SmlStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Failure(SmlStatus::InvalidArgument, "path is not UTF-8".into()))?;
        emit(out, SmlModel(MlpModel::load(Path::new(path))?))
    })
}

/// Raw feature dimension, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn sml_model_input_dim(m: *const SmlModel) -> usize {
    m.as_ref().map_or(0, |m| m.0.architecture().input_dim)
}

/// Number of classes, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn sml_model_num_classes(m: *const SmlModel) -> usize {
    m.as_ref().map_or(0, |m| m.0.num_classes())
}

/// Logits of class 0 against each other class, `z_0 - z_g` for
/// `g = 1..M`, written to `out[0..M-1]`.
///
/// # Safety
/// `h` must hold `h_len` doubles and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sml_model_logits(
    m: *const SmlModel,
    h: *const f64,
    h_len: usize,
    out: *mut f64,
    out_len: usize,
) -> SmlStatus {
    guard(|| {
        let m = deref(m, "model")?;
        let z = m.0.logits_vs_reference(slice(h, h_len, "h")?)?;
        check_len(z.len(), out_len, "logit output")?;
        slice_mut(out, out_len, "out")?.copy_from_slice(&z);
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sml_model_free(m: *mut SmlModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Belief engine over a copy of `matrix` with `components` statistics per
/// agent. `delta == 0` selects plain social learning; `0 < delta < 1` the
/// adaptive recursion.
///
/// # Safety
/// `matrix` must be a live matrix handle and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn sml_engine_new(
    matrix: *const SmlCombinationMatrix,
    components: usize,
    delta: f64,
    out: *mut *mut SmlBeliefEngine,
) -> SmlStatus {
    guard(|| {
        let m = deref(matrix, "matrix")?;
        if components == 0 {
            return Err(Failure(SmlStatus::InvalidArgument, "components must be positive".into()));
        }
        let engine = if delta == 0.0 { Engine::Sl } else { Engine::Asl { delta } };
        engine.validate()?;
        emit(
            out,
            SmlBeliefEngine {
                matrix: m.0.clone(),
                engine,
                state: BeliefState::zeros(m.0.size(), components),
            },
        )
    })
}

/// Advances one step with agent statistics `stats`, row-major
/// `agents x components`.
///
/// # Safety
/// `e` must be a live engine handle and `stats` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sml_engine_step(e: *mut SmlBeliefEngine, stats: *const f64, len: usize) -> SmlStatus {
    guard(|| {
        let e = e.as_mut().ok_or_else(|| null("engine"))?;
        let (k, g) = (e.state.num_agents(), e.state.components());
        check_len(k * g, len, "statistics")?;
        let rows: Vec<Vec<f64>> = slice(stats, len, "stats")?.chunks(g).map(<[f64]>::to_vec).collect();
        e.state = e.engine.step(&e.state, &e.matrix, &rows)?;
        Ok(())
    })
}

/// Current log-belief ratios, row-major `agents x components`.
///
/// # Safety
/// `e` must be a live engine handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sml_engine_lambda(e: *const SmlBeliefEngine, out: *mut f64, len: usize) -> SmlStatus {
    guard(|| {
        let e = deref(e, "engine")?;
        let flat: Vec<f64> = e.state.lambda.iter().flatten().copied().collect();
        check_len(flat.len(), len, "lambda output")?;
        slice_mut(out, len, "out")?.copy_from_slice(&flat);
        Ok(())
    })
}

/// Current class decision of every agent (class index, 0 is `+1` in the
/// binary case).
///
/// # Safety
/// `e` must be a live engine handle and `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn sml_engine_decisions(e: *const SmlBeliefEngine, out: *mut usize, len: usize) -> SmlStatus {
    guard(|| {
        let e = deref(e, "engine")?;
        check_len(e.state.num_agents(), len, "decision output")?;
        slice_mut(out, len, "out")?.copy_from_slice(&decide(&e.state));
        Ok(())
    })
}

/// Steps taken since creation or the last reset, or 0 for a null handle.
///
/// # Safety
/// `e` must be null or a live engine handle.
#[no_mangle]
pub unsafe extern "C" fn sml_engine_time(e: *const SmlBeliefEngine) -> usize {
    e.as_ref().map_or(0, |e| e.state.time)
}

/// Clears the beliefs back to zero.
///
/// # Safety
/// `e` must be a live engine handle.
#[no_mangle]
pub unsafe extern "C" fn sml_engine_reset(e: *mut SmlBeliefEngine) -> SmlStatus {
    guard(|| {
        let e = e.as_mut().ok_or_else(|| null("engine"))?;
        e.state = BeliefState::zeros(e.state.num_agents(), e.state.components());
        Ok(())
    })
}

/// # Safety
/// `e` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sml_engine_free(e: *mut SmlBeliefEngine) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// Exact error exponent at target risk `r` in `[0, log 2)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sml_exact_exponent(r: f64, out: *mut f64) -> SmlStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = theory::exact_exponent(r)?;
        Ok(())
    })
}

/// Linear approximation of the error exponent.
#[no_mangle]
pub extern "C" fn sml_approx_exponent(r: f64) -> f64 {
    theory::approx_exponent(r)
}

/// Training samples per agent sufficient for consistency at confidence
/// `1 - eps`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sml_sample_complexity(
    c: f64,
    target_risk: f64,
    alpha: f64,
    beta: f64,
    eps: f64,
    out: *mut u64,
) -> SmlStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = theory::sample_complexity(c, target_risk, alpha, beta, eps)?;
        Ok(())
    })
}
