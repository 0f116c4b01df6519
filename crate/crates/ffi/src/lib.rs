//! C interface to `edm-snl`.
//!
//! Objects are passed as opaque handles created by `edm_snl_generate`,
//! `edm_snl_instance_load` or `edm_snl_solve` and released with the matching
//! `*_free`. Every fallible call returns an [`EdmSnlError`]; on failure a
//! message is available from [`edm_snl_last_error`] on the same thread.
//! Matrices are exchanged as row-major `double` buffers.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use edm_snl::locate::{self, translate_back};
use edm_snl::model::{self, build_partial_edm, GenerateParams, Instance};
use edm_snl::relax::FormKind;
use edm_snl::solve::{self, CliqueMode, Solution, SolveOptions, SolverConfig, Status};
use edm_snl::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdmSnlError {
    Ok = 0,
    /// A required pointer was null.
    NullPointer = 1,
    /// An argument or parameter was out of range.
    InvalidArgument = 2,
    /// Reading or writing a file failed, or its contents were malformed.
    Io = 3,
    /// The computation failed numerically or the input was inconsistent.
    Numerical = 4,
    /// A caller-supplied buffer is too small.
    BufferTooSmall = 5,
    /// An internal error was caught at the boundary.
    Panic = 6,
}

/// Formulation selector for [`edm_snl_solve`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdmSnlForm {
    Quadratic = 0,
    Linearized = 1,
}

/// Termination status of a solve.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdmSnlStatus {
    Converged = 0,
    MaxIter = 1,
    NumericalFailure = 2,
}

/// Parameters of a random instance; see [`edm_snl_generate_defaults`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EdmSnlGenerateParams {
    pub r: usize,
    pub n: usize,
    pub m: usize,
    /// Radio range; `INFINITY` for unlimited.
    pub radio_range: f64,
    pub density: f64,
    pub noise_sigma: f64,
    pub square_half_width: f64,
    pub seed: u64,
    /// Nonzero adds lower bounds for pairs out of range.
    pub out_of_range_bounds: c_int,
}

/// Solver options; see [`edm_snl_solve_defaults`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EdmSnlSolveParams {
    pub form: EdmSnlForm,
    /// Nonzero enables automatic sensor clique detection.
    pub detect_cliques: c_int,
    /// Smallest clique accepted by detection; 0 means `r + 2`.
    pub min_clique_size: usize,
    pub gap_tol: f64,
    pub max_iter: usize,
}

/// Opaque problem instance.
pub struct EdmSnlInstance {
    inner: Instance,
}

/// Opaque solve result.
pub struct EdmSnlSolution {
    inner: Solution,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn code_of(e: &Error) -> EdmSnlError {
    match edm_snl::cli::exit_code(e) {
        edm_snl::cli::EXIT_IO => EdmSnlError::Io,
        edm_snl::cli::EXIT_USAGE => EdmSnlError::InvalidArgument,
        _ => EdmSnlError::Numerical,
    }
}

/// Runs `f`, recording errors and panics.
fn guard(f: impl FnOnce() -> Result<(), (EdmSnlError, String)>) -> EdmSnlError {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EdmSnlError::Ok,
        Ok(Err((code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            EdmSnlError::Panic
        }
    }
}

fn lib(e: Error) -> (EdmSnlError, String) {
    (code_of(&e), e.to_string())
}

fn null(what: &str) -> (EdmSnlError, String) {
    (EdmSnlError::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, (EdmSnlError, String)> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (EdmSnlError::InvalidArgument, "path is not valid UTF-8".to_string()))?;
    Ok(PathBuf::from(s))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message describing the last failed call on this thread, or null. Valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn edm_snl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn edm_snl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn edm_snl_generate_defaults() -> EdmSnlGenerateParams {
    let d = GenerateParams::default();
    EdmSnlGenerateParams {
        r: d.r,
        n: d.n,
        m: d.m,
        radio_range: d.radio_range,
        density: d.density,
        noise_sigma: d.noise_sigma,
        square_half_width: d.square_half_width,
        seed: d.seed,
        out_of_range_bounds: c_int::from(d.out_of_range_bounds),
    }
}

#[no_mangle]
pub extern "C" fn edm_snl_solve_defaults() -> EdmSnlSolveParams {
    let d = SolverConfig::default();
    EdmSnlSolveParams {
        form: EdmSnlForm::Quadratic,
        detect_cliques: 0,
        min_clique_size: 0,
        gap_tol: d.gap_tol,
        max_iter: d.max_iter,
    }
}

/// Draws a random connected instance.
///
/// # Safety
/// `params` must point to a valid struct and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn edm_snl_generate(
    params: *const EdmSnlGenerateParams,
    out: *mut *mut EdmSnlInstance,
) -> EdmSnlError {
    guard(|| {
        if params.is_null() {
            return Err(null("params"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let p = &*params;
        let inst = model::generate(&GenerateParams {
            r: p.r,
            n: p.n,
            m: p.m,
            radio_range: p.radio_range,
            density: p.density,
            noise_sigma: p.noise_sigma,
            square_half_width: p.square_half_width,
            seed: p.seed,
            out_of_range_bounds: p.out_of_range_bounds != 0,
        })
        .map_err(lib)?;
        write_out(out, EdmSnlInstance { inner: inst });
        Ok(())
    })
}

/// Reads an instance JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn edm_snl_instance_load(path: *const c_char, out: *mut *mut EdmSnlInstance) -> EdmSnlError {
    guard(|| {
        let path = path_arg(path)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inst = model::load_instance(&path).map_err(lib)?;
        write_out(out, EdmSnlInstance { inner: inst });
        Ok(())
    })
}

/// Writes an instance as JSON.
///
/// # Safety
/// `inst` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn edm_snl_instance_save(inst: *const EdmSnlInstance, path: *const c_char) -> EdmSnlError {
    guard(|| {
        let inst = inst.as_ref().ok_or_else(|| null("instance"))?;
        let path = path_arg(path)?;
        model::save_instance(&inst.inner, &path).map_err(lib)
    })
}

/// Dimension, sensor count and anchor count. Null outputs are skipped.
///
/// # Safety
/// `inst` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn edm_snl_instance_dims(
    inst: *const EdmSnlInstance,
    r: *mut usize,
    n: *mut usize,
    m: *mut usize,
) -> EdmSnlError {
    guard(|| {
        let inst = &inst.as_ref().ok_or_else(|| null("instance"))?.inner;
        for (dst, v) in [(r, inst.r), (n, inst.n), (m, inst.m)] {
            if !dst.is_null() {
                *dst = v;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `inst` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn edm_snl_instance_free(inst: *mut EdmSnlInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Solves the relaxation. A solve that stops without converging still
/// produces a handle; query [`edm_snl_solution_status`].
///
/// # Safety
/// `inst` must be a live handle, `params` null (defaults) or valid, and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn edm_snl_solve(
    inst: *const EdmSnlInstance,
    params: *const EdmSnlSolveParams,
    out: *mut *mut EdmSnlSolution,
) -> EdmSnlError {
    guard(|| {
        let inst = &inst.as_ref().ok_or_else(|| null("instance"))?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        let p = params.as_ref().copied().unwrap_or_else(|| edm_snl_solve_defaults());
        let cliques = if p.detect_cliques != 0 {
            let min_size = if p.min_clique_size == 0 { inst.r + 2 } else { p.min_clique_size };
            CliqueMode::Auto { min_size }
        } else if let Some(c) = &inst.cliques {
            CliqueMode::Given(c.clone())
        } else {
            CliqueMode::None
        };
        let form = match p.form {
            EdmSnlForm::Quadratic => FormKind::Quadratic,
            EdmSnlForm::Linearized => FormKind::Linearized,
        };
        let config = SolverConfig { gap_tol: p.gap_tol, max_iter: p.max_iter, ..Default::default() };
        let sol = solve::solve_instance(inst, &SolveOptions { form, cliques, config }).map_err(lib)?;
        write_out(out, EdmSnlSolution { inner: sol });
        Ok(())
    })
}

/// # Safety
/// `sol` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn edm_snl_solution_status(sol: *const EdmSnlSolution) -> EdmSnlStatus {
    match sol.as_ref().map(|s| s.inner.status) {
        Some(Status::Converged) => EdmSnlStatus::Converged,
        Some(Status::MaxIter) => EdmSnlStatus::MaxIter,
        _ => EdmSnlStatus::NumericalFailure,
    }
}

/// Objective, relative gap, iteration count and reduced order. Null outputs
/// are skipped.
///
/// # Safety
/// `sol` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn edm_snl_solution_summary(
    sol: *const EdmSnlSolution,
    objective: *mut f64,
    relgap: *mut f64,
    iterations: *mut usize,
    reduced_order: *mut usize,
) -> EdmSnlError {
    guard(|| {
        let s = &sol.as_ref().ok_or_else(|| null("solution"))?.inner;
        if !objective.is_null() {
            *objective = s.objective;
        }
        if !relgap.is_null() {
            *relgap = s.relgap;
        }
        if !iterations.is_null() {
            *iterations = s.iterations();
        }
        if !reduced_order.is_null() {
            *reduced_order = s.reduced_order;
        }
        Ok(())
    })
}

/// Copies the `(n + m) x (n + m)` Gram matrix into `buf`.
///
/// # Safety
/// `sol` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn edm_snl_solution_gram(sol: *const EdmSnlSolution, buf: *mut f64, len: usize) -> EdmSnlError {
    guard(|| {
        let s = &sol.as_ref().ok_or_else(|| null("solution"))?.inner;
        let k = s.ybar.nrows();
        copy_row_major(&s.ybar, buf, len, k * k)
    })
}

unsafe fn copy_row_major(
    mat: &nalgebra::DMatrix<f64>,
    buf: *mut f64,
    len: usize,
    need: usize,
) -> Result<(), (EdmSnlError, String)> {
    if buf.is_null() {
        return Err(null("buffer"));
    }
    if len < need {
        return Err((EdmSnlError::BufferTooSmall, format!("need {need} doubles, got {len}")));
    }
    let dst = std::slice::from_raw_parts_mut(buf, need);
    for (i, row) in mat.row_iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            dst[i * mat.ncols() + j] = *v;
        }
    }
    Ok(())
}

/// Extracts sensor positions with Method 1 or 2. `positions` receives the
/// `n x r` estimate in the instance's original coordinates; `measures`
/// (three doubles, may be null) receives Measures 1 to 3, with `NAN` for
/// Measure 2 when the instance has no ground truth.
///
/// # Safety
/// Handles must be live and belong together; `positions` must hold `len`
/// doubles and `measures`, when non-null, three.
#[no_mangle]
pub unsafe extern "C" fn edm_snl_locate(
    inst: *const EdmSnlInstance,
    sol: *const EdmSnlSolution,
    method: c_int,
    positions: *mut f64,
    len: usize,
    measures: *mut f64,
) -> EdmSnlError {
    guard(|| {
        let inst = &inst.as_ref().ok_or_else(|| null("instance"))?.inner;
        let s = &sol.as_ref().ok_or_else(|| null("solution"))?.inner;
        if !(1..=2).contains(&method) {
            return Err((EdmSnlError::InvalidArgument, format!("method must be 1 or 2, got {method}")));
        }
        if s.ybar.nrows() != inst.n + inst.m {
            return Err((EdmSnlError::InvalidArgument, "solution does not match instance".into()));
        }
        let pe = build_partial_edm(inst).map_err(lib)?;
        let res = locate::locate_both(&s.ybar, &inst.anchors, &pe, inst.x_true.as_ref()).map_err(lib)?;
        let r = &res[method as usize - 1];
        let pts = translate_back(&r.x_est, &inst.translation);
        copy_row_major(&pts, positions, len, inst.n * inst.r)?;
        if !measures.is_null() {
            let m = std::slice::from_raw_parts_mut(measures, 3);
            m[0] = r.measures.m1;
            m[1] = r.measures.m2.unwrap_or(f64::NAN);
            m[2] = r.measures.m3;
        }
        Ok(())
    })
}

/// # Safety
/// `sol` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn edm_snl_solution_free(sol: *mut EdmSnlSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}
