//! C ABI for `mm_galerkin`.
//!
//! Every fallible function returns an [`MmgStatus`]. On failure a message is
//! stored per thread and can be read with [`mmg_last_error_message`]. Handles
//! are opaque and must be released with the matching `_free` function.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use mm_galerkin::config::RunConfig;
use mm_galerkin::io::CoefficientFile;
use mm_galerkin::problem::builtin;
use mm_galerkin::quadrature::QuadratureRule;
use mm_galerkin::rom::{build_rom_from_coefficients, GainSpec};
use mm_galerkin::{
    assemble_operators, residual_norm, simulate_fom, simulate_rom, solve_invariance,
    steady_state_rms, Backend, Basis, BoxDomain, Error, Problem, ReducedOrderModel, SimConfig,
    Solution, SolverOptions,
};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MmgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NotConverged = 4,
    Singular = 5,
    NotDetectable = 6,
    UnstableGain = 7,
    NonFinite = 8,
    Integration = 9,
    Config = 10,
    Format = 11,
    Io = 12,
    BufferTooSmall = 13,
    Panic = 14,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MmgBackend {
    Auto = 0,
    DenseLu = 1,
    Pseudoinverse = 2,
    BlockTridiagonal = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MmgSolverOptions {
    /// Stop when `‖F‖_1` falls below this.
    pub tol_f_l1: f64,
    pub max_iter: u32,
    pub backend: MmgBackend,
    pub rank_cutoff: f64,
    pub damping: f64,
}

/// A problem: signal generator plus full-order system.
pub struct MmgProblem {
    inner: Problem,
}

/// Result of a Galerkin solve, converged or not.
pub struct MmgSolution {
    problem: Problem,
    basis: Basis,
    domain: BoxDomain,
    solution: Solution,
}

pub struct MmgRom {
    problem: Problem,
    rom: ReducedOrderModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> MmgStatus {
    match e {
        Error::InvalidArgument(_) | Error::CountOverflow { .. } | Error::Degenerate(_) => {
            MmgStatus::InvalidArgument
        }
        Error::DimensionMismatch { .. } => MmgStatus::DimensionMismatch,
        Error::NotConverged { .. } => MmgStatus::NotConverged,
        Error::SingularJacobian(_) | Error::Singular(_) => MmgStatus::Singular,
        Error::NotDetectable(_) => MmgStatus::NotDetectable,
        Error::UnstableGain { .. } => MmgStatus::UnstableGain,
        Error::NonFinite { .. } => MmgStatus::NonFinite,
        Error::Integration { .. } => MmgStatus::Integration,
        Error::Config { .. } => MmgStatus::Config,
        Error::Format(_) => MmgStatus::Format,
        Error::Io(_) => MmgStatus::Io,
    }
}

struct Fail(MmgStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(MmgStatus::NullPointer, format!("`{what}` is null"))
}

fn guard<F>(f: F) -> MmgStatus
where
    F: FnOnce() -> Result<MmgStatus, Fail>,
{
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err(Fail(s, msg))) => {
            set_last_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal panic: {msg}"));
            MmgStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(MmgStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn copy_out(src: &[f64], out: *mut f64, len: usize) -> Result<MmgStatus, Fail> {
    if len < src.len() {
        return Err(Fail(
            MmgStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        ));
    }
    if src.is_empty() {
        return Ok(MmgStatus::Ok);
    }
    if out.is_null() {
        return Err(null("out"));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(MmgStatus::Ok)
}

fn domain_from(lo: &[f64], hi: &[f64]) -> Result<BoxDomain, Fail> {
    Ok(BoxDomain::new(lo.to_vec(), hi.to_vec())?)
}

/// Message for the last failure on this thread, or null. Valid until the next
/// call into this library from the same thread.
#[no_mangle]
pub extern "C" fn mmg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static, NUL-terminated version string.
#[no_mangle]
pub extern "C" fn mmg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn mmg_solver_options_default() -> MmgSolverOptions {
    let d = SolverOptions::default();
    MmgSolverOptions {
        tol_f_l1: d.tol_f_l1,
        max_iter: d.max_iter as u32,
        backend: MmgBackend::Auto,
        rank_cutoff: d.rank_cutoff,
        damping: d.damping,
    }
}

impl From<&MmgSolverOptions> for SolverOptions {
    fn from(o: &MmgSolverOptions) -> Self {
        SolverOptions {
            tol_f_l1: o.tol_f_l1,
            max_iter: o.max_iter as usize,
            backend: match o.backend {
                MmgBackend::Auto => Backend::Auto,
                MmgBackend::DenseLu => Backend::DenseLu,
                MmgBackend::Pseudoinverse => Backend::Pseudoinverse,
                MmgBackend::BlockTridiagonal => Backend::BlockTridiagonal,
            },
            rank_cutoff: o.rank_cutoff,
            damping: o.damping,
            ..SolverOptions::default()
        }
    }
}

/// Build a named built-in problem. `keys` and `values` hold `n_params`
/// parameter overrides and may be null when `n_params` is zero.
///
/// # Safety
/// Pointers must be valid for the stated lengths; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn mmg_problem_builtin(
    name: *const c_char,
    keys: *const *const c_char,
    values: *const f64,
    n_params: usize,
    out: *mut *mut MmgProblem,
) -> MmgStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let name = str_arg(name, "name")?;
        let mut params = BTreeMap::new();
        if n_params > 0 {
            if keys.is_null() {
                return Err(null("keys"));
            }
            let vals = slice_arg(values, n_params, "values")?;
            for (k, v) in vals.iter().enumerate() {
                params.insert(str_arg(*keys.add(k), "keys[i]")?.to_string(), *v);
            }
        }
        let p = builtin(name, &params)?;
        *out = Box::into_raw(Box::new(MmgProblem { inner: p }));
        Ok(MmgStatus::Ok)
    })
}

/// Build the problem described by a run configuration in TOML.
///
/// # Safety
/// `toml` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mmg_problem_from_toml(
    toml: *const c_char,
    out: *mut *mut MmgProblem,
) -> MmgStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let cfg = RunConfig::from_toml(str_arg(toml, "toml")?)?;
        let p = cfg.problem.build()?;
        *out = Box::into_raw(Box::new(MmgProblem { inner: p }));
        Ok(MmgStatus::Ok)
    })
}

/// # Safety
/// `p` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn mmg_problem_free(p: *mut MmgProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// State dimension `n`, or 0 for a null handle.
///
/// # Safety
/// `p` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mmg_problem_state_dim(p: *const MmgProblem) -> usize {
    p.as_ref().map_or(0, |p| p.inner.state_dim())
}

/// Generator dimension `d`, or 0 for a null handle.
///
/// # Safety
/// `p` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mmg_problem_generator_dim(p: *const MmgProblem) -> usize {
    p.as_ref().map_or(0, |p| p.inner.generator_dim())
}

/// Solve the invariance equation on the box `[lo, hi]` with total degree
/// `degree`. `quad_order` of 0 selects the default rule. `options` may be
/// null for defaults.
///
/// When Newton stops without converging the handle is still returned together
/// with `MMG_STATUS_NOT_CONVERGED`, so the iterate can be inspected.
///
/// # Safety
/// `lo` and `hi` must each hold `dim` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mmg_solve(
    problem: *const MmgProblem,
    lo: *const f64,
    hi: *const f64,
    dim: usize,
    degree: u32,
    quad_order: usize,
    options: *const MmgSolverOptions,
    out: *mut *mut MmgSolution,
) -> MmgStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let problem = &ref_arg(problem, "problem")?.inner;
        let domain = domain_from(slice_arg(lo, dim, "lo")?, slice_arg(hi, dim, "hi")?)?;
        let opts = match options.as_ref() {
            Some(o) => SolverOptions::from(o),
            None => SolverOptions::default(),
        };
        let basis = Basis::new(problem.generator_dim(), degree)?;
        let q = if quad_order == 0 {
            mm_galerkin::assembly::default_quadrature_order(problem, degree)
        } else {
            quad_order
        };
        let rule = QuadratureRule::tensor(&domain, q)?;
        let ops = assemble_operators(problem, &basis, &domain, &rule)?;
        let (solution, status, msg) = match solve_invariance(problem, &ops, &opts) {
            Ok(s) => (s, MmgStatus::Ok, None),
            Err(Error::NotConverged { solution, reason }) => {
                (*solution, MmgStatus::NotConverged, Some(reason))
            }
            Err(e) => return Err(e.into()),
        };
        *out = Box::into_raw(Box::new(MmgSolution {
            problem: problem.clone(),
            basis,
            domain,
            solution,
        }));
        if let Some(m) = msg {
            return Err(Fail(status, format!("Newton iteration did not converge: {m}")));
        }
        Ok(status)
    })
}

/// Load coefficients written by the command-line tool. The file must have been
/// produced for `problem`.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mmg_solution_read(
    problem: *const MmgProblem,
    path: *const c_char,
    out: *mut *mut MmgSolution,
) -> MmgStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let problem = &ref_arg(problem, "problem")?.inner;
        let file = CoefficientFile::read(Path::new(str_arg(path, "path")?))?;
        if file.fingerprint != problem.fingerprint() {
            return Err(Fail(
                MmgStatus::Format,
                "coefficient file was written for a different problem".into(),
            ));
        }
        if file.n != problem.state_dim() || file.d != problem.generator_dim() {
            return Err(Fail(
                MmgStatus::DimensionMismatch,
                "coefficient file dimensions differ from the problem".into(),
            ));
        }
        let basis = Basis::new(file.d, file.degree)?;
        *out = Box::into_raw(Box::new(MmgSolution {
            problem: problem.clone(),
            basis,
            domain: file.domain,
            solution: Solution {
                c: file.coefficients,
                iterations: 0,
                residual_history: Vec::new(),
                converged: true,
                backend_used: Backend::Auto,
                pseudoinverse_steps: 0,
                elapsed_seconds: 0.0,
            },
        }));
        Ok(MmgStatus::Ok)
    })
}

/// # Safety
/// `s` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mmg_solution_write(s: *const MmgSolution, path: *const c_char) -> MmgStatus {
    guard(|| {
        let s = ref_arg(s, "solution")?;
        let file = CoefficientFile::new(
            &s.domain,
            s.basis.degree(),
            &s.problem.fingerprint(),
            &s.solution.c,
        )?;
        file.write(Path::new(str_arg(path, "path")?))?;
        Ok(MmgStatus::Ok)
    })
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn mmg_solution_free(s: *mut MmgSolution) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// `s` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mmg_solution_converged(s: *const MmgSolution) -> bool {
    s.as_ref().is_some_and(|s| s.solution.converged)
}

/// # Safety
/// `s` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mmg_solution_iterations(s: *const MmgSolution) -> usize {
    s.as_ref().map_or(0, |s| s.solution.iterations)
}

/// Final `‖F‖_1`, NaN for a null handle or a loaded file.
///
/// # Safety
/// `s` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mmg_solution_final_residual(s: *const MmgSolution) -> f64 {
    s.as_ref().map_or(f64::NAN, |s| s.solution.final_residual())
}

/// Number of coefficients, `N * n`.
///
/// # Safety
/// `s` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mmg_solution_coefficient_count(s: *const MmgSolution) -> usize {
    s.as_ref().map_or(0, |s| s.solution.c.len())
}

/// Copy coefficients into `out`, block by block in graded-lex order.
///
/// # Safety
/// `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn mmg_solution_coefficients(
    s: *const MmgSolution,
    out: *mut f64,
    len: usize,
) -> MmgStatus {
    guard(|| {
        let s = ref_arg(s, "solution")?;
        copy_out(s.solution.c.as_slice(), out, len)
    })
}

/// Weighted residual norm over `[lo, hi]` with `q` points per dimension.
///
/// # Safety
/// `lo` and `hi` must each hold `dim` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mmg_solution_residual_norm(
    s: *const MmgSolution,
    lo: *const f64,
    hi: *const f64,
    dim: usize,
    q: usize,
    out: *mut f64,
) -> MmgStatus {
    guard(|| {
        let s = ref_arg(s, "solution")?;
        let out = out_arg(out, "out")?;
        let sub = domain_from(slice_arg(lo, dim, "lo")?, slice_arg(hi, dim, "hi")?)?;
        *out = residual_norm(&s.problem, &s.basis, &s.solution.c, &sub, q)?.weighted_norm;
        Ok(MmgStatus::Ok)
    })
}

/// Build a reduced-order model with a designed output-injection gain whose
/// closed-loop spectrum lies left of `-margin`.
///
/// # Safety
/// `s` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mmg_rom_build(
    s: *const MmgSolution,
    margin: f64,
    out: *mut *mut MmgRom,
) -> MmgStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let s = ref_arg(s, "solution")?;
        if !s.solution.converged {
            return Err(Fail(
                MmgStatus::NotConverged,
                "ROM requires a converged solution".into(),
            ));
        }
        let rom = build_rom_from_coefficients(
            &s.problem,
            &s.basis,
            &s.domain,
            &s.solution.c,
            &GainSpec::Designed { margin },
        )?;
        *out = Box::into_raw(Box::new(MmgRom {
            problem: s.problem.clone(),
            rom,
        }));
        Ok(MmgStatus::Ok)
    })
}

/// # Safety
/// `r` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn mmg_rom_free(r: *mut MmgRom) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// ROM state dimension, or 0 for a null handle.
///
/// # Safety
/// `r` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mmg_rom_dim(r: *const MmgRom) -> usize {
    r.as_ref().map_or(0, |r| r.rom.dim())
}

/// Largest real part of the ROM Jacobian at the origin.
///
/// # Safety
/// `r` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mmg_rom_max_real_part(r: *const MmgRom) -> f64 {
    r.as_ref().map_or(f64::NAN, |r| r.rom.stability().max_real_part)
}

/// Evaluate `dr/dt` at state `r` (length `d`) and input `u` (length `m`).
///
/// # Safety
/// `state` must hold `d` values, `u` `m` values and `out` `d` values.
#[no_mangle]
pub unsafe extern "C" fn mmg_rom_dynamics(
    r: *const MmgRom,
    state: *const f64,
    u: *const f64,
    out: *mut f64,
) -> MmgStatus {
    guard(|| {
        let r = ref_arg(r, "rom")?;
        let d = r.rom.dim();
        let x = slice_arg(state, d, "state")?;
        let u = slice_arg(u, r.rom.input_dim(), "u")?;
        let v = r.rom.dynamics(x, u)?;
        copy_out(&v, out, d)
    })
}

/// Evaluate the ROM output at state `r`.
///
/// # Safety
/// `state` must hold `d` values; `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn mmg_rom_output(
    r: *const MmgRom,
    state: *const f64,
    out: *mut f64,
    len: usize,
) -> MmgStatus {
    guard(|| {
        let r = ref_arg(r, "rom")?;
        let x = slice_arg(state, r.rom.dim(), "state")?;
        copy_out(&r.rom.output(x), out, len)
    })
}

/// Simulate the full model from `x = 0` and the ROM from `r0`, both driven by
/// the generator from `w0`, over `[0, t_end]`, and report the steady-state
/// relative RMS output error.
///
/// # Safety
/// `w0` and `r0` must each hold `d` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mmg_rom_relative_rms(
    r: *const MmgRom,
    w0: *const f64,
    r0: *const f64,
    t_end: f64,
    out: *mut f64,
) -> MmgStatus {
    guard(|| {
        let r = ref_arg(r, "rom")?;
        let out = out_arg(out, "out")?;
        let d = r.rom.dim();
        let w0 = slice_arg(w0, d, "w0")?;
        let r0 = slice_arg(r0, d, "r0")?;
        let cfg = SimConfig {
            t_span: (0.0, t_end),
            ..SimConfig::default()
        };
        cfg.validate()?;
        let x0 = vec![0.0; r.problem.state_dim()];
        let fom = simulate_fom(&r.problem, w0, &x0, &cfg)?;
        let rom = simulate_rom(&r.rom, w0, r0, &cfg)?;
        *out = steady_state_rms(&fom, &rom, &cfg)?.relative_rms;
        Ok(MmgStatus::Ok)
    })
}
