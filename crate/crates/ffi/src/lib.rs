//! C ABI over `aggrank`.
//!
//! Every fallible function returns an [`AggrankStatus`]; on failure a
//! message is available from [`aggrank_last_error`] on the same thread.
//! Outputs go through caller-provided pointers and are written only on
//! success. Datasets are opaque handles released with
//! [`aggrank_dataset_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use aggrank::aggregation::{empirical_log_odds_scores, thurstone_mosteller_scores};
use aggrank::datagen::limiting_score;
use aggrank::experiments::{train_regression, ExperimentConfig};
use aggrank::letor::letor_parse;
use aggrank::losses::{err_loss, ndcg_loss, DiscountFunction, GainFunction};
use aggrank::optimizer::{ScheduleKind, StepSchedule};
use aggrank::{ComparisonPreference, Error, LinearScorer, QueryDataset, ScoreStructure, SkewSymmetricAggregate};
use nalgebra::DMatrix;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggrankStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Io = 4,
    /// The algorithm ran but could not produce a result (no convergence,
    /// disconnected comparisons, infinite log-odds, ...).
    AlgorithmFailure = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggrankGain {
    Exp2MinusOne = 0,
    Exp2 = 1,
    Identity = 2,
    Clamped01 = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggrankDiscount {
    Log1p = 0,
    Identity = 1,
}

/// Opaque query dataset.
pub struct AggrankDataset {
    inner: QueryDataset,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: AggrankStatus,
    message: String,
}

impl Failure {
    fn new(status: AggrankStatus, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Parse { .. } => AggrankStatus::Parse,
            Error::NoWitness(_)
            | Error::NoConvergence { .. }
            | Error::NonFiniteGradient { .. }
            | Error::Lp(_)
            | Error::Disconnected
            | Error::InfiniteLogOdds => AggrankStatus::AlgorithmFailure,
            _ => AggrankStatus::InvalidArgument,
        };
        Failure::new(status, e.to_string())
    }
}

fn set_last_error(message: Option<String>) {
    let c = message.map(|m| CString::new(m.replace('\0', " ")).expect("interior NULs removed"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AggrankStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error(None);
            AggrankStatus::Ok
        }
        Ok(Err(fail)) => {
            set_last_error(Some(fail.message));
            fail.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(Some(format!("panic: {msg}")));
            AggrankStatus::Panic
        }
    }
}

fn null(name: &str) -> Failure {
    Failure::new(AggrankStatus::NullPointer, format!("{name} is NULL"))
}

/// # Safety
/// `ptr` must be NULL only when `len == 0`, otherwise valid for `len` reads.
unsafe fn input<'a, T>(ptr: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// # Safety
/// `ptr` must be valid for `len` writes.
unsafe fn output<'a, T>(ptr: *mut T, len: usize, name: &str) -> Result<&'a mut [T], Failure> {
    if ptr.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

unsafe fn dataset<'a>(ds: *const AggrankDataset) -> Result<&'a QueryDataset, Failure> {
    ds.as_ref().map(|d| &d.inner).ok_or_else(|| null("dataset"))
}

unsafe fn c_str<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Failure::new(AggrankStatus::InvalidArgument, format!("{name} is not valid UTF-8")))
}

fn gain_of(g: AggrankGain) -> GainFunction {
    match g {
        AggrankGain::Exp2MinusOne => GainFunction::Exp2MinusOne,
        AggrankGain::Exp2 => GainFunction::Exp2,
        AggrankGain::Identity => GainFunction::Identity,
        AggrankGain::Clamped01 => GainFunction::Clamped01,
    }
}

fn discount_of(d: AggrankDiscount) -> DiscountFunction {
    match d {
        AggrankDiscount::Log1p => DiscountFunction::Log1p,
        AggrankDiscount::Identity => DiscountFunction::Identity,
    }
}

/// Message of the last failed call on this thread, or NULL after a
/// successful call. The pointer stays valid until the next call into the
/// library on the same thread.
#[no_mangle]
pub extern "C" fn aggrank_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn aggrank_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// NDCG loss `1 - DCG(alpha)/Z(s)` of scores `alpha` against structure `s`,
/// both of length `m`.
///
/// # Safety
/// `alpha` and `s` must point to `m` doubles; `out` to one double.
#[no_mangle]
pub unsafe extern "C" fn aggrank_ndcg_loss(
    alpha: *const f64,
    s: *const f64,
    m: usize,
    gain: AggrankGain,
    discount: AggrankDiscount,
    out: *mut f64,
) -> AggrankStatus {
    guard(|| {
        let alpha = input(alpha, m, "alpha")?;
        let s = ScoreStructure::new(input(s, m, "s")?.to_vec())?;
        let out = output(out, 1, "out")?;
        out[0] = ndcg_loss(alpha, &s, &gain_of(gain), discount_of(discount))?;
        Ok(())
    })
}

/// ERR loss; gains must lie in `[0, 1]`.
///
/// # Safety
/// As for [`aggrank_ndcg_loss`].
#[no_mangle]
pub unsafe extern "C" fn aggrank_err_loss(
    alpha: *const f64,
    s: *const f64,
    m: usize,
    gain: AggrankGain,
    discount: AggrankDiscount,
    out: *mut f64,
) -> AggrankStatus {
    guard(|| {
        let alpha = input(alpha, m, "alpha")?;
        let s = ScoreStructure::new(input(s, m, "s")?.to_vec())?;
        let out = output(out, 1, "out")?;
        out[0] = err_loss(alpha, &s, &gain_of(gain), discount_of(discount))?;
        Ok(())
    })
}

/// Limit of averaged empirical log-odds under BTL sampling with relevances
/// `relevances`.
///
/// # Safety
/// `relevances` and `out` must point to `m` doubles.
#[no_mangle]
pub unsafe extern "C" fn aggrank_limiting_score(relevances: *const f64, m: usize, out: *mut f64) -> AggrankStatus {
    guard(|| {
        let s = limiting_score(input(relevances, m, "relevances")?)?;
        output(out, m, "out")?.copy_from_slice(s.as_slice());
        Ok(())
    })
}

/// Empirical log-odds scores from `n` comparisons `winners[i] > losers[i]`
/// on `m` items with smoothing `smoothing`.
///
/// # Safety
/// `winners` and `losers` must point to `n` values; `out` to `m` doubles.
#[no_mangle]
pub unsafe extern "C" fn aggrank_log_odds_scores(
    winners: *const usize,
    losers: *const usize,
    n: usize,
    m: usize,
    smoothing: f64,
    out: *mut f64,
) -> AggrankStatus {
    guard(|| {
        let w = input(winners, n, "winners")?;
        let l = input(losers, n, "losers")?;
        let comps =
            w.iter().zip(l).map(|(&a, &b)| ComparisonPreference::new(a, b, m)).collect::<Result<Vec<_>, _>>()?;
        let s = empirical_log_odds_scores(&comps, m, smoothing)?;
        output(out, m, "out")?.copy_from_slice(s.as_slice());
        Ok(())
    })
}

/// Thurstone-Mosteller least-squares scores for the skew-symmetric
/// `m x m` row-major matrix `a`. `mask` is an optional row-major `m x m`
/// byte matrix (nonzero = observed, diagonal set); NULL means fully observed.
///
/// # Safety
/// `a` must point to `m*m` doubles, `mask` to `m*m` bytes or be NULL, and
/// `out` to `m` doubles.
#[no_mangle]
pub unsafe extern "C" fn aggrank_thurstone_scores(
    a: *const f64,
    mask: *const u8,
    m: usize,
    out: *mut f64,
) -> AggrankStatus {
    guard(|| {
        let a = DMatrix::from_row_slice(m, m, input(a, m * m, "a")?);
        let agg = if mask.is_null() {
            SkewSymmetricAggregate::full(a)?
        } else {
            let mask = input(mask, m * m, "mask")?;
            let mask = DMatrix::from_row_iterator(m, m, mask.iter().map(|&b| b != 0));
            SkewSymmetricAggregate::new(a, mask)?
        };
        let s = thurstone_mosteller_scores(&agg)?;
        output(out, m, "out")?.copy_from_slice(s.as_slice());
        Ok(())
    })
}

fn boxed(data: QueryDataset) -> *mut AggrankDataset {
    Box::into_raw(Box::new(AggrankDataset { inner: data }))
}

/// Parses LETOR text (NUL-terminated) into a new dataset without judgments.
///
/// # Safety
/// `text` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aggrank_dataset_parse_letor(
    text: *const c_char,
    out: *mut *mut AggrankDataset,
) -> AggrankStatus {
    guard(|| {
        let text = c_str(text, "text")?;
        let out = output(out, 1, "out")?;
        out[0] = boxed(letor_parse(text)?);
        Ok(())
    })
}

/// Loads a dataset directory written by `aggrank gen-data`: `data.letor`
/// plus the `judgments.json` sidecar when present.
///
/// # Safety
/// `dir` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aggrank_dataset_load_dir(dir: *const c_char, out: *mut *mut AggrankDataset) -> AggrankStatus {
    guard(|| {
        let dir = c_str(dir, "dir")?;
        let out = output(out, 1, "out")?;
        let data = aggrank::cli::load_dataset(Path::new(dir)).map_err(|m| Failure::new(AggrankStatus::Io, m))?;
        out[0] = boxed(data);
        Ok(())
    })
}

/// Releases a dataset. NULL is ignored.
///
/// # Safety
/// `ds` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn aggrank_dataset_free(ds: *mut AggrankDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Number of queries.
///
/// # Safety
/// `ds` must be a live dataset handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aggrank_dataset_num_queries(ds: *const AggrankDataset, out: *mut usize) -> AggrankStatus {
    guard(|| {
        let n = dataset(ds)?.len();
        output(out, 1, "out")?[0] = n;
        Ok(())
    })
}

/// Feature dimension shared by all queries.
///
/// # Safety
/// As for [`aggrank_dataset_num_queries`].
#[no_mangle]
pub unsafe extern "C" fn aggrank_dataset_dim(ds: *const AggrankDataset, out: *mut usize) -> AggrankStatus {
    guard(|| {
        let d = dataset(ds)?.dim();
        output(out, 1, "out")?[0] = d;
        Ok(())
    })
}

/// Total number of judgments over all queries.
///
/// # Safety
/// As for [`aggrank_dataset_num_queries`].
#[no_mangle]
pub unsafe extern "C" fn aggrank_dataset_num_judgments(ds: *const AggrankDataset, out: *mut usize) -> AggrankStatus {
    guard(|| {
        let n = dataset(ds)?.num_judgments();
        output(out, 1, "out")?[0] = n;
        Ok(())
    })
}

/// Number of items of query `q`.
///
/// # Safety
/// As for [`aggrank_dataset_num_queries`].
#[no_mangle]
pub unsafe extern "C" fn aggrank_dataset_query_items(
    ds: *const AggrankDataset,
    q: usize,
    out: *mut usize,
) -> AggrankStatus {
    guard(|| {
        let data = dataset(ds)?;
        if q >= data.len() {
            return Err(Failure::new(AggrankStatus::InvalidArgument, format!("query {q} out of range")));
        }
        output(out, 1, "out")?[0] = data.query(q).m();
        Ok(())
    })
}

/// Linear scores `X_q theta` of query `q`; `out` has room for `out_len`
/// doubles, which must equal the query's item count.
///
/// # Safety
/// `theta` must point to `d` doubles and `out` to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn aggrank_dataset_scores(
    ds: *const AggrankDataset,
    q: usize,
    theta: *const f64,
    d: usize,
    out: *mut f64,
    out_len: usize,
) -> AggrankStatus {
    guard(|| {
        let data = dataset(ds)?;
        if q >= data.len() {
            return Err(Failure::new(AggrankStatus::InvalidArgument, format!("query {q} out of range")));
        }
        let query = data.query(q);
        if out_len != query.m() {
            return Err(Error::DimensionMismatch { expected: query.m(), actual: out_len }.into());
        }
        let scorer = LinearScorer::new(input(theta, d, "theta")?.to_vec())?;
        let s = scorer.scores(&query.features)?;
        output(out, out_len, "out")?.copy_from_slice(&s);
        Ok(())
    })
}

/// Trains the NDCG regression surrogate on empirical log-odds of `k`
/// judgments per term by proximal SGD with steps `step_scale / sqrt(t)`,
/// writing the averaged iterate to `theta_out` (length `d`, the dataset
/// dimension).
///
/// # Safety
/// `ds` must be a live dataset handle; `theta_out` must point to `d` doubles.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn aggrank_train_regression(
    ds: *const AggrankDataset,
    k: usize,
    lambda: f64,
    step_scale: f64,
    iterations: usize,
    smoothing: f64,
    seed: u64,
    theta_out: *mut f64,
    d: usize,
) -> AggrankStatus {
    guard(|| {
        let data = dataset(ds)?;
        if d != data.dim() {
            return Err(Error::DimensionMismatch { expected: data.dim(), actual: d }.into());
        }
        let cfg = ExperimentConfig {
            lambda,
            schedule: StepSchedule::new(ScheduleKind::InvSqrtT, step_scale)?,
            iterations,
            smoothing,
        };
        let report = train_regression(data, k, &cfg, seed)?;
        output(theta_out, d, "theta_out")?.copy_from_slice(&report.theta_avg);
        Ok(())
    })
}
