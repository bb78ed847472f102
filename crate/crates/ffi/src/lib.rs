//! C ABI for `mfsobol`.
//!
//! Every fallible function returns an [`MfsStatus`]. On failure a message is
//! stored per thread and can be read with [`mfs_last_error`]. Arrays are
//! passed as pointer plus length; matrices are row-major unless stated
//! otherwise. Handles are opaque and must be released with the matching
//! `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use mfsobol::campaign::{build_runners, CampaignConfig, ModelRunner};
use mfsobol::estimators::{
    check_cost_ratio, mc_sobol, mfmc_sobol, optimal_allocation, AllocationPlan, EvalTable, PilotStatistics,
    SaltelliEvals, SobolEstimate,
};
use mfsobol::pce::{fit_pce, pc_sobol, PcSurrogate};
use mfsobol::sampling::{sobol_points, Parameter, ParameterSpace, PointSet, SobolSequence};
use mfsobol::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfsStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// Lengths, sizes or values outside the accepted domain.
    InvalidArgument = 2,
    /// Correlations or costs violate the allocation ordering.
    Inadmissible = 3,
    /// The budget leaves fewer than two high-fidelity rows.
    BudgetTooSmall = 4,
    SolverFailure = 5,
    LeastSquares = 6,
    DegenerateStatistics = 7,
    /// The configuration text could not be parsed or is inconsistent.
    Config = 8,
    Io = 9,
    /// A Rust panic was caught at the boundary.
    Panic = 10,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NUL removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Fail {
    Null(&'static str),
    Arg(String),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn status_of(e: &Error) -> MfsStatus {
    match e {
        Error::Domain(_) | Error::UnsupportedDimension { .. } => MfsStatus::InvalidArgument,
        Error::SolverFailure { .. } => MfsStatus::SolverFailure,
        Error::Evaluation { source, .. } => status_of(source),
        Error::LeastSquares(_) => MfsStatus::LeastSquares,
        Error::DegenerateStatistics(_) => MfsStatus::DegenerateStatistics,
        Error::Inadmissible { .. } => MfsStatus::Inadmissible,
        Error::BudgetTooSmall { .. } => MfsStatus::BudgetTooSmall,
        Error::Config { .. } | Error::Parse { .. } | Error::Ordering(_) => MfsStatus::Config,
        Error::Io(_) | Error::Json(_) => MfsStatus::Io,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MfsStatus {
    let (status, message) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => return MfsStatus::Ok,
        Ok(Err(Fail::Null(what))) => (MfsStatus::NullPointer, format!("`{what}` is NULL")),
        Ok(Err(Fail::Arg(m))) => (MfsStatus::InvalidArgument, m),
        Ok(Err(Fail::Core(e))) => (status_of(&e), e.to_string()),
        Err(p) => {
            let m = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            (MfsStatus::Panic, format!("panic: {m}"))
        }
    };
    set_last_error(message);
    status
}

unsafe fn input<'a, T>(ptr: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

unsafe fn output<'a, T>(ptr: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(slice::from_raw_parts_mut(ptr, len))
}

unsafe fn text<'a>(ptr: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if ptr.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Fail::Arg(format!("`{what}` is not valid UTF-8")))
}

unsafe fn handle<'a, T>(ptr: *const T, what: &'static str) -> Result<&'a T, Fail> {
    ptr.as_ref().ok_or(Fail::Null(what))
}

unsafe fn give<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the most recent failure on the calling thread, or NULL.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn mfs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mfs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---------------------------------------------------------------- sampling

/// Incremental unscrambled Sobol' generator.
pub struct MfsSobol(SobolSequence);

/// Creates a generator whose first point has sequence index `skip`.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn mfs_sobol_new(dim: usize, skip: u64, out: *mut *mut MfsSobol) -> MfsStatus {
    guard(|| {
        let mut seq = SobolSequence::new(dim)?;
        seq.seek(skip);
        give(out, MfsSobol(seq))
    })
}

/// Writes the next point (`dim` values in `[0, 1)`) and advances.
///
/// # Safety
/// `point` must hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn mfs_sobol_next(seq: *mut MfsSobol, point: *mut f64, dim: usize) -> MfsStatus {
    guard(|| {
        let seq = seq.as_mut().ok_or(Fail::Null("seq"))?;
        if dim != seq.0.dim() {
            return Err(Fail::Arg(format!("generator has dimension {}, got {dim}", seq.0.dim())));
        }
        seq.0.next_into(output(point, dim, "point")?);
        Ok(())
    })
}

/// # Safety
/// `seq` must come from [`mfs_sobol_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mfs_sobol_free(seq: *mut MfsSobol) {
    if !seq.is_null() {
        drop(Box::from_raw(seq));
    }
}

/// Fills `points` (row-major, `n × dim`) with Sobol' points `skip..skip+n`.
///
/// # Safety
/// `points` must hold `n * dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn mfs_sobol_points(dim: usize, n: usize, skip: u64, points: *mut f64) -> MfsStatus {
    guard(|| {
        let pts = sobol_points(dim, n, skip)?;
        output(points, n * dim, "points")?.copy_from_slice(pts.as_slice());
        Ok(())
    })
}

// ---------------------------------------------------------------- models

/// One model of a campaign configuration.
pub struct MfsModel(ModelRunner);

/// Builds model `model_id` from campaign TOML text. Relative waveform paths
/// resolve against the working directory. Perturbed 0D models evaluate the
/// unperturbed 0D solver; the trend correction needs pilot data.
///
/// # Safety
/// Both strings must be NUL-terminated; `out` must be a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn mfs_model_new(
    config_toml: *const c_char,
    model_id: *const c_char,
    out: *mut *mut MfsModel,
) -> MfsStatus {
    guard(|| {
        let cfg = CampaignConfig::from_toml_str(text(config_toml, "config_toml")?, None)?;
        let id = text(model_id, "model_id")?;
        let runner = build_runners(&cfg)?
            .into_iter()
            .find(|r| r.id == id)
            .ok_or_else(|| Fail::Arg(format!("no model with id `{id}`")))?;
        give(out, MfsModel(runner))
    })
}

/// Number of outputs written by [`mfs_model_evaluate`].
///
/// # Safety
/// `model` must be a live handle or NULL (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn mfs_model_output_count(model: *const MfsModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.outputs.len())
}

/// Evaluates the model at physical inputs `z`.
///
/// # Safety
/// `z` must hold `dim` doubles and `outputs` `n_outputs` doubles.
#[no_mangle]
pub unsafe extern "C" fn mfs_model_evaluate(
    model: *const MfsModel,
    z: *const f64,
    dim: usize,
    outputs: *mut f64,
    n_outputs: usize,
) -> MfsStatus {
    guard(|| {
        let m = handle(model, "model")?;
        if n_outputs != m.0.outputs.len() {
            return Err(Fail::Arg(format!("model writes {} outputs, got room for {n_outputs}", m.0.outputs.len())));
        }
        let y = m.0.solver.run(input(z, dim, "z")?)?;
        output(outputs, n_outputs, "outputs")?.copy_from_slice(&y);
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`mfs_model_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mfs_model_free(model: *mut MfsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

// ---------------------------------------------------------------- estimators

/// Scalar part of a Sobol' estimate; indices go to caller arrays.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MfsEstimate {
    pub mean: f64,
    pub variance: f64,
    /// Non-positive variance estimate; the indices are then zero.
    pub degenerate: bool,
}

/// Outputs of one model on the Saltelli matrices. `c` is column-major by
/// matrix: `c[j * rows + i]` is row `i` of `C_j`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MfsLevel {
    pub a: *const f64,
    pub b: *const f64,
    pub c: *const f64,
    pub rows: usize,
}

unsafe fn level_evals(level: &MfsLevel, dim: usize) -> Result<SaltelliEvals, Fail> {
    let n = level.rows;
    let c = input(level.c, n * dim, "c")?;
    Ok(SaltelliEvals {
        a: input(level.a, n, "a")?.to_vec(),
        b: input(level.b, n, "b")?.to_vec(),
        c: (0..dim).map(|j| c[j * n..(j + 1) * n].to_vec()).collect(),
    })
}

unsafe fn write_estimate(
    e: &SobolEstimate,
    out: *mut MfsEstimate,
    main: *mut f64,
    total: *mut f64,
) -> Result<(), Fail> {
    let d = e.dim();
    *out.as_mut().ok_or(Fail::Null("out"))? = MfsEstimate {
        mean: e.mean,
        variance: e.variance,
        degenerate: e.degenerate,
    };
    output(main, d, "main")?.copy_from_slice(&e.main);
    output(total, d, "total")?.copy_from_slice(&e.total);
    Ok(())
}

/// Single-fidelity Saltelli estimate with the Owen main-effect estimator.
///
/// # Safety
/// `level` must describe valid arrays; `main` and `total` hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn mfs_mc_sobol(
    level: *const MfsLevel,
    dim: usize,
    out: *mut MfsEstimate,
    main: *mut f64,
    total: *mut f64,
) -> MfsStatus {
    guard(|| {
        let evals = level_evals(handle(level, "level")?, dim)?;
        write_estimate(&mc_sobol(&evals)?, out, main, total)
    })
}

/// Multifidelity estimate over `k` nested levels, highest fidelity first.
/// Level `i` must provide at least `m[i]` rows.
///
/// # Safety
/// `levels`, `m`, `alpha` and `costs` hold `k` entries; `main` and `total`
/// hold `dim` doubles.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn mfs_mfmc_sobol(
    levels: *const MfsLevel,
    k: usize,
    dim: usize,
    m: *const usize,
    alpha: *const f64,
    costs: *const f64,
    out: *mut MfsEstimate,
    main: *mut f64,
    total: *mut f64,
) -> MfsStatus {
    guard(|| {
        if k == 0 {
            return Err(Fail::Arg("at least one level required".into()));
        }
        let evals = input(levels, k, "levels")?
            .iter()
            .map(|l| level_evals(l, dim))
            .collect::<Result<Vec<_>, _>>()?;
        let costs = input(costs, k, "costs")?.to_vec();
        let plan = AllocationPlan {
            budget: 0.0,
            d: dim,
            costs: costs.clone(),
            m: input(m, k, "m")?.to_vec(),
            alpha: input(alpha, k, "alpha")?.to_vec(),
            r: vec![1.0; k],
        };
        let est = mfmc_sobol(&EvalTable::new(evals, costs), &plan)?;
        write_estimate(&est, out, main, total)
    })
}

/// Optimal rows `m` and control-variate weights `alpha` for `k` models with
/// output deviations `sigma`, correlations `rho` with model 1 (`rho[0] = 1`)
/// and per-evaluation `costs`.
///
/// # Safety
/// Input arrays hold `k` doubles; `m` and `alpha` have room for `k` values.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn mfs_optimal_allocation(
    sigma: *const f64,
    rho: *const f64,
    costs: *const f64,
    k: usize,
    budget: f64,
    dim: usize,
    m: *mut usize,
    alpha: *mut f64,
) -> MfsStatus {
    guard(|| {
        let stats = PilotStatistics::from_summary(input(sigma, k, "sigma")?, input(rho, k, "rho")?, 0);
        let plan = optimal_allocation(&stats, input(costs, k, "costs")?, budget, dim)?;
        output(m, k, "m")?.copy_from_slice(&plan.m);
        output(alpha, k, "alpha")?.copy_from_slice(&plan.alpha);
        Ok(())
    })
}

/// Checks the correlation ordering and cost-ratio conditions. Offending
/// 1-based levels go to `violations` (room for `k`), their number to
/// `n_violations`.
///
/// # Safety
/// `rho` and `costs` hold `k` doubles; `violations` has room for `k` values.
#[no_mangle]
pub unsafe extern "C" fn mfs_check_cost_ratio(
    rho: *const f64,
    costs: *const f64,
    k: usize,
    violations: *mut usize,
    n_violations: *mut usize,
) -> MfsStatus {
    guard(|| {
        let stats = PilotStatistics::from_summary(&vec![1.0; k], input(rho, k, "rho")?, 0);
        let check = check_cost_ratio(&stats, input(costs, k, "costs")?);
        output(violations, k, "violations")?[..check.violations.len()].copy_from_slice(&check.violations);
        *n_violations.as_mut().ok_or(Fail::Null("n_violations"))? = check.violations.len();
        Ok(())
    })
}

// ---------------------------------------------------------------- polynomial chaos

/// Fitted Legendre polynomial chaos surrogate.
pub struct MfsPce(PcSurrogate);

/// Least-squares fit of total degree `order` on uniform inputs with bounds
/// `lower`/`upper`. `z` is `n × dim` row-major in physical units.
///
/// # Safety
/// `lower`/`upper` hold `dim` doubles, `z` `n * dim`, `y` `n`.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn mfs_pce_fit(
    lower: *const f64,
    upper: *const f64,
    dim: usize,
    order: u32,
    z: *const f64,
    y: *const f64,
    n: usize,
    out: *mut *mut MfsPce,
) -> MfsStatus {
    guard(|| {
        let (lo, hi) = (input(lower, dim, "lower")?, input(upper, dim, "upper")?);
        let params = (0..dim)
            .map(|i| Parameter::new(format!("z{}", i + 1), lo[i], hi[i], ""))
            .collect();
        let space = ParameterSpace::new(params)?;
        let points = PointSet::from_row_major(dim, input(z, n * dim, "z")?.to_vec());
        let surrogate = fit_pce(&space, order, &points, input(y, n, "y")?)?;
        give(out, MfsPce(surrogate))
    })
}

/// # Safety
/// `z` holds `dim` doubles; `value` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mfs_pce_evaluate(pce: *const MfsPce, z: *const f64, dim: usize, value: *mut f64) -> MfsStatus {
    guard(|| {
        let p = handle(pce, "pce")?;
        if dim != p.0.basis.d {
            return Err(Fail::Arg(format!("surrogate has {} inputs, got {dim}", p.0.basis.d)));
        }
        let v = p.0.evaluate(input(z, dim, "z")?);
        *value.as_mut().ok_or(Fail::Null("value"))? = v;
        Ok(())
    })
}

/// Mean, variance and Sobol' indices read off the coefficients.
///
/// # Safety
/// `main` and `total` hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn mfs_pce_sobol(
    pce: *const MfsPce,
    dim: usize,
    out: *mut MfsEstimate,
    main: *mut f64,
    total: *mut f64,
) -> MfsStatus {
    guard(|| {
        let p = handle(pce, "pce")?;
        if dim != p.0.basis.d {
            return Err(Fail::Arg(format!("surrogate has {} inputs, got {dim}", p.0.basis.d)));
        }
        write_estimate(&pc_sobol(&p.0), out, main, total)
    })
}

/// # Safety
/// `pce` must come from [`mfs_pce_fit`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mfs_pce_free(pce: *mut MfsPce) {
    if !pce.is_null() {
        drop(Box::from_raw(pce));
    }
}
