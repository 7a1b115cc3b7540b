//! C ABI for the seatrade library.
//!
//! Every fallible function returns a [`SeatradeStatus`]; on failure the
//! message is available from [`seatrade_last_error`] on the same thread.
//! Arrays are passed as pointer plus length. Raster stacks are `n_dates`
//! row-major `width * height` grids laid end to end, with NaN marking
//! nodata pixels. Undefined scalar results are reported as NaN.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use chrono::{Days, NaiveDate};
use seatrade::extrap::{self, PortSeries};
use seatrade::gbt::{self, HyperParams, Matrix, TreeEnsemble};
use seatrade::mc::{self, McConfig};
use seatrade::raster::{self, AoiMonthStack, NtlStdMode, RasterGrid};
use seatrade::{eval, Error, YearMonth};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeatradeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The inputs have no usable (unmasked, finite) values.
    NoValidData = 3,
    /// Malformed model JSON, config JSON or schema mismatch.
    Parse = 4,
    /// Any other library error.
    Failed = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

/// Opaque fitted model.
pub struct SeatradeModel {
    inner: TreeEnsemble,
}

/// Boosting hyperparameters; fill with [`seatrade_params_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SeatradeParams {
    pub n_rounds: u32,
    pub max_depth: u32,
    pub learning_rate: f64,
    pub min_child_weight: f64,
    pub l2_reg: f64,
    pub subsample_rows: f64,
    pub subsample_cols: f64,
    pub n_bins: u32,
    pub seed: u64,
}

impl From<&SeatradeParams> for HyperParams {
    fn from(p: &SeatradeParams) -> Self {
        HyperParams {
            n_rounds: p.n_rounds as usize,
            max_depth: p.max_depth as usize,
            learning_rate: p.learning_rate,
            min_child_weight: p.min_child_weight,
            l2_reg: p.l2_reg,
            subsample_rows: p.subsample_rows,
            subsample_cols: p.subsample_cols,
            n_bins: p.n_bins as usize,
            seed: p.seed,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SeatradeNtlStats {
    pub mean: f64,
    pub max: f64,
    pub std: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SeatradeMetrics {
    pub r2: f64,
    pub pearson_corr: f64,
    pub mae: f64,
    pub rmse: f64,
    pub mape_pct: f64,
    pub n: usize,
}

/// Means (and standard deviations) over Monte Carlo replications.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SeatradeMcSummary {
    pub n_ok: usize,
    pub n_failed: usize,
    pub raw_r2_mean: f64,
    pub raw_r2_sd: f64,
    pub anchored_r2_mean: f64,
    pub anchored_r2_sd: f64,
    pub delta_slope_mean: f64,
    pub delta_slope_sd: f64,
    pub delta_corr_mean: f64,
    pub delta_corr_sd: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(SeatradeStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidArgument(_)
            | Error::Config(_)
            | Error::DimensionMismatch(..)
            | Error::InvalidGrid(_)
            | Error::NegativeRadiance { .. }
            | Error::EmptyStack => SeatradeStatus::InvalidArgument,
            Error::NoValidPixels(_) | Error::Empty(_) => SeatradeStatus::NoValidData,
            Error::Json(_) | Error::Schema(_) => SeatradeStatus::Parse,
            _ => SeatradeStatus::Failed,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(SeatradeStatus::InvalidArgument, msg.into())
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, recording any error or panic for [`seatrade_last_error`].
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SeatradeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SeatradeStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            SeatradeStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be null or valid for reads of `len` values.
unsafe fn input<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure(SeatradeStatus::NullPointer, format!("{what} is null")));
    }
    Ok(slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or valid for writes of `len` values.
unsafe fn output<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure(SeatradeStatus::NullPointer, format!("{what} is null")));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: non-null pointers are required by every caller to be valid for writes.
    unsafe { p.as_mut() }.ok_or_else(|| Failure(SeatradeStatus::NullPointer, format!("{what} is null")))
}

fn opt(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn seatrade_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Writes the default hyperparameters to `out`.
#[no_mangle]
pub extern "C" fn seatrade_params_default(out: *mut SeatradeParams) -> SeatradeStatus {
    guard(|| {
        let d = HyperParams::default();
        *out_ref(out, "out")? = SeatradeParams {
            n_rounds: d.n_rounds as u32,
            max_depth: d.max_depth as u32,
            learning_rate: d.learning_rate,
            min_child_weight: d.min_child_weight,
            l2_reg: d.l2_reg,
            subsample_rows: d.subsample_rows,
            subsample_cols: d.subsample_cols,
            n_bins: d.n_bins as u32,
            seed: d.seed,
        };
        Ok(())
    })
}

/// Fits a model on the row-major `n_rows * n_cols` matrix `x` (NaN =
/// missing) and targets `y`. `params` may be null for defaults. On success
/// `*out` owns a model to release with [`seatrade_model_free`].
///
/// # Safety
/// `x` and `y` must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn seatrade_model_fit(
    x: *const f64,
    n_rows: usize,
    n_cols: usize,
    y: *const f64,
    params: *const SeatradeParams,
    out: *mut *mut SeatradeModel,
) -> SeatradeStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let len = n_rows.checked_mul(n_cols).ok_or_else(|| invalid("matrix size overflows"))?;
        let x = input(x, len, "x")?;
        let y = input(y, n_rows, "y")?;
        let params = params.as_ref().map(HyperParams::from).unwrap_or_default();
        let names: Vec<String> = (0..n_cols).map(|i| format!("f{i}")).collect();
        let model = gbt::fit(&Matrix::new(x, n_cols)?, y, &names, &params)?;
        *out = Box::into_raw(Box::new(SeatradeModel { inner: model }));
        Ok(())
    })
}

/// Predicts `n_rows` rows of `x` into `out`.
///
/// # Safety
/// `model` must come from this library; buffers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn seatrade_model_predict(
    model: *const SeatradeModel,
    x: *const f64,
    n_rows: usize,
    n_cols: usize,
    out: *mut f64,
) -> SeatradeStatus {
    guard(|| {
        let model = model.as_ref().ok_or(Failure(SeatradeStatus::NullPointer, "model is null".into()))?;
        let len = n_rows.checked_mul(n_cols).ok_or_else(|| invalid("matrix size overflows"))?;
        let x = input(x, len, "x")?;
        let out = output(out, n_rows, "out")?;
        if n_rows == 0 {
            return Ok(());
        }
        let pred = model.inner.predict(&Matrix::new(x, n_cols)?)?;
        out.copy_from_slice(&pred);
        Ok(())
    })
}

/// Number of input columns the model expects.
///
/// # Safety
/// `model` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn seatrade_model_n_features(model: *const SeatradeModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.feature_names.len())
}

/// Per-feature share of split gain in percent, in column order.
///
/// # Safety
/// `out` must be valid for `len` writes; `len` must equal the feature count.
#[no_mangle]
pub unsafe extern "C" fn seatrade_model_importance(
    model: *const SeatradeModel,
    out: *mut f64,
    len: usize,
) -> SeatradeStatus {
    guard(|| {
        let model = model.as_ref().ok_or(Failure(SeatradeStatus::NullPointer, "model is null".into()))?;
        let imp = model.inner.gain_importance();
        if len != imp.len() {
            return Err(invalid(format!("buffer holds {len} values, model has {} features", imp.len())));
        }
        for (o, (_, g)) in output(out, len, "out")?.iter_mut().zip(imp) {
            *o = g;
        }
        Ok(())
    })
}

/// Serializes the model; `*out` must be released with [`seatrade_string_free`].
///
/// # Safety
/// `model` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn seatrade_model_to_json(model: *const SeatradeModel, out: *mut *mut c_char) -> SeatradeStatus {
    guard(|| {
        let model = model.as_ref().ok_or(Failure(SeatradeStatus::NullPointer, "model is null".into()))?;
        let out = out_ref(out, "out")?;
        let json = model.inner.to_json()?;
        *out = CString::new(json).map_err(|e| invalid(e.to_string()))?.into_raw();
        Ok(())
    })
}

/// Loads a model from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn seatrade_model_from_json(json: *const c_char, out: *mut *mut SeatradeModel) -> SeatradeStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if json.is_null() {
            return Err(Failure(SeatradeStatus::NullPointer, "json is null".into()));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| Failure(SeatradeStatus::Parse, e.to_string()))?;
        let inner = TreeEnsemble::from_json(text)?;
        *out = Box::into_raw(Box::new(SeatradeModel { inner }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or come from this library, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn seatrade_model_free(model: *mut SeatradeModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn seatrade_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `values` must hold `width * height * n_dates` values.
unsafe fn stack_from(values: *const f64, width: usize, height: usize, n_dates: usize) -> Result<AoiMonthStack, Failure> {
    let cells = width.checked_mul(height).ok_or_else(|| invalid("grid size overflows"))?;
    let len = cells.checked_mul(n_dates).ok_or_else(|| invalid("stack size overflows"))?;
    if len == 0 {
        return Err(invalid("empty stack"));
    }
    let values = input(values, len, "values")?;
    // Only the order of acquisitions matters; give them consecutive days.
    let first = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
    if n_dates > 28 {
        return Err(invalid("at most 28 acquisitions per month"));
    }
    let grids = values
        .chunks(cells)
        .enumerate()
        .map(|(d, g)| RasterGrid::new(width, height, g.to_vec(), first + Days::new(d as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AoiMonthStack::new("ffi", YearMonth::of(first), grids)?)
}

/// Median of consecutive-acquisition dB change sums. Writes NaN when the
/// stack has fewer than two usable acquisitions.
///
/// # Safety
/// `values` must hold `width * height * n_dates` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn seatrade_vv_diff_median(
    values: *const f64,
    width: usize,
    height: usize,
    n_dates: usize,
    out: *mut f64,
) -> SeatradeStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = opt(raster::vv_diff_median(&stack_from(values, width, height, n_dates)?)?);
        Ok(())
    })
}

/// Mean dB of the per-pixel median composite.
///
/// # Safety
/// As for [`seatrade_vv_diff_median`].
#[no_mangle]
pub unsafe extern "C" fn seatrade_vh_backscatter(
    values: *const f64,
    width: usize,
    height: usize,
    n_dates: usize,
    out: *mut f64,
) -> SeatradeStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = raster::vh_backscatter(&stack_from(values, width, height, n_dates)?)?;
        Ok(())
    })
}

/// Nighttime-light statistics. `temporal_std` selects the spread of daily
/// means instead of the spatial spread of the composite.
///
/// # Safety
/// As for [`seatrade_vv_diff_median`].
#[no_mangle]
pub unsafe extern "C" fn seatrade_ntl_stats(
    values: *const f64,
    width: usize,
    height: usize,
    n_dates: usize,
    temporal_std: bool,
    out: *mut SeatradeNtlStats,
) -> SeatradeStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let mode = if temporal_std { NtlStdMode::Temporal } else { NtlStdMode::Spatial };
        let s = raster::ntl_stats(&stack_from(values, width, height, n_dates)?, mode)?;
        *out = SeatradeNtlStats {
            mean: s.mean,
            max: s.max,
            std: s.std,
        };
        Ok(())
    })
}

/// Share of composite pixels with radiance strictly above `tau`.
///
/// # Safety
/// As for [`seatrade_vv_diff_median`].
#[no_mangle]
pub unsafe extern "C" fn seatrade_lit_area_ratio(
    values: *const f64,
    width: usize,
    height: usize,
    n_dates: usize,
    tau: f64,
    out: *mut f64,
) -> SeatradeStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = raster::lit_area_ratio(&stack_from(values, width, height, n_dates)?, tau)?;
        Ok(())
    })
}

/// Test-set metrics; undefined ones are NaN.
///
/// # Safety
/// `actual` and `predicted` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn seatrade_metrics(
    actual: *const f64,
    predicted: *const f64,
    n: usize,
    out: *mut SeatradeMetrics,
) -> SeatradeStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let m = eval::metrics(input(actual, n, "actual")?, input(predicted, n, "predicted")?)?;
        *out = SeatradeMetrics {
            r2: opt(m.r2),
            pearson_corr: opt(m.pearson_corr),
            mae: m.mae,
            rmse: m.rmse,
            mape_pct: opt(m.mape_pct),
            n: m.n,
        };
        Ok(())
    })
}

/// Shifts `raw` so that its first value equals `observed_first`; writes the
/// anchored series to `out` (may alias `raw`) and `offset` such that
/// `anchored = raw - offset`.
///
/// # Safety
/// `raw` and `out` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn seatrade_anchor(
    raw: *const f64,
    n: usize,
    observed_first: f64,
    out: *mut f64,
    offset: *mut f64,
) -> SeatradeStatus {
    guard(|| {
        if n == 0 {
            return Err(invalid("empty series"));
        }
        let values = input(raw, n, "raw")?.to_vec();
        let start = YearMonth::new(2000, 1).unwrap();
        let series = PortSeries::new("ffi", (0..n).map(|i| start.offset(i as i64)).collect(), values)?;
        let a = extrap::anchor(&series, observed_first)?;
        output(out, n, "out")?.copy_from_slice(&a.anchored_pred);
        if let Some(o) = offset.as_mut() {
            *o = a.offset;
        }
        Ok(())
    })
}

/// `mean(post) - mean(pre)` of a log-scale series.
///
/// # Safety
/// `pre` and `post` must hold `n_pre` and `n_post` values.
#[no_mangle]
pub unsafe extern "C" fn seatrade_window_delta(
    pre: *const f64,
    n_pre: usize,
    post: *const f64,
    n_post: usize,
    out: *mut f64,
) -> SeatradeStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = extrap::window_delta(input(pre, n_pre, "pre")?, input(post, n_post, "post")?)?;
        Ok(())
    })
}

/// Runs the Monte Carlo simulation. `config_json` holds any subset of the
/// configuration fields, or is null for the defaults.
///
/// # Safety
/// `config_json` must be null or a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn seatrade_mc_run(config_json: *const c_char, out: *mut SeatradeMcSummary) -> SeatradeStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let cfg: McConfig = if config_json.is_null() {
            McConfig::default()
        } else {
            let text = CStr::from_ptr(config_json)
                .to_str()
                .map_err(|e| Failure(SeatradeStatus::Parse, e.to_string()))?;
            serde_json::from_str(text).map_err(|e| Failure(SeatradeStatus::Parse, e.to_string()))?
        };
        let s = mc::run_mc(&cfg)?.summary;
        *out = SeatradeMcSummary {
            n_ok: s.n_ok,
            n_failed: s.n_failed,
            raw_r2_mean: s.raw_r2.mean,
            raw_r2_sd: s.raw_r2.sd,
            anchored_r2_mean: s.anchored_r2.mean,
            anchored_r2_sd: s.anchored_r2.sd,
            delta_slope_mean: s.delta_slope.mean,
            delta_slope_sd: s.delta_slope.sd,
            delta_corr_mean: s.delta_corr.mean,
            delta_corr_sd: s.delta_corr.sd,
        };
        Ok(())
    })
}
