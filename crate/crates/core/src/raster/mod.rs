//! Reductions from per-AOI raster stacks to monthly activity features.
//!
//! Every statistic skips nodata pixels. Pairwise operations use the
//! intersection of the two masks; temporal composites use whatever
//! observations each pixel has.

mod extract;
mod rgrid;

pub use extract::{
    extract_features, read_features_csv, write_features_csv, ExtractOptions, FeatureRow,
    FEATURES_HEADER,
};
pub use rgrid::{read_rgrid, read_rgrid_bytes, write_rgrid, write_rgrid_bytes, RGRID_MAGIC};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::month::YearMonth;

/// Offset added before taking the logarithm so zero radiance stays finite.
pub const DB_EPSILON: f64 = 1e-8;

/// Default lit-pixel radiance threshold.
pub const DEFAULT_LIT_THRESHOLD: f64 = 0.5;

/// Single-band image over one AOI at one acquisition date.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid {
    width: usize,
    height: usize,
    values: Vec<f64>,
    nodata: Vec<bool>,
    timestamp: NaiveDate,
}

impl RasterGrid {
    /// Builds a grid from row-major values; non-finite values become nodata.
    pub fn new(width: usize, height: usize, values: Vec<f64>, timestamp: NaiveDate) -> Result<Self> {
        let nodata = values.iter().map(|v| !v.is_finite()).collect();
        Self::with_mask(width, height, values, nodata, timestamp)
    }

    pub fn with_mask(
        width: usize,
        height: usize,
        mut values: Vec<f64>,
        nodata: Vec<bool>,
        timestamp: NaiveDate,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidGrid(format!("empty extent {width}x{height}")));
        }
        if values.len() != width * height || nodata.len() != values.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values / {} mask entries for a {width}x{height} grid",
                values.len(),
                nodata.len()
            )));
        }
        for (v, &masked) in values.iter_mut().zip(&nodata) {
            if masked {
                *v = f64::NAN;
            } else if !v.is_finite() {
                return Err(Error::InvalidGrid("non-finite value at an unmasked pixel".into()));
            }
        }
        Ok(RasterGrid {
            width,
            height,
            values,
            nodata,
            timestamp,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamp(&self) -> NaiveDate {
        self.timestamp
    }

    /// Raw values; masked pixels read as NaN.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nodata(&self) -> &[bool] {
        &self.nodata
    }

    pub fn get(&self, index: usize) -> Option<f64> {
        (!self.nodata[index]).then(|| self.values[index])
    }

    pub fn valid_count(&self) -> usize {
        self.nodata.iter().filter(|m| !**m).count()
    }

    fn valid_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .zip(&self.nodata)
            .filter(|(_, m)| !**m)
            .map(|(v, _)| *v)
    }

    fn same_shape(&self, other: &RasterGrid) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    fn map_valid(&self, f: impl Fn(f64) -> f64) -> RasterGrid {
        let values = self
            .values
            .iter()
            .zip(&self.nodata)
            .map(|(&v, &m)| if m { f64::NAN } else { f(v) })
            .collect();
        RasterGrid {
            values,
            ..self.clone()
        }
    }
}

/// Time-ordered grids for one AOI within one calendar month.
#[derive(Debug, Clone)]
pub struct AoiMonthStack {
    pub aoi_id: String,
    pub year_month: YearMonth,
    grids: Vec<RasterGrid>,
}

impl AoiMonthStack {
    pub fn new(aoi_id: impl Into<String>, year_month: YearMonth, grids: Vec<RasterGrid>) -> Result<Self> {
        for g in &grids {
            if !year_month.contains(g.timestamp) {
                return Err(Error::InvalidGrid(format!(
                    "grid dated {} outside {year_month}",
                    g.timestamp
                )));
            }
        }
        for pair in grids.windows(2) {
            pair[0].same_shape(&pair[1])?;
            if pair[0].timestamp >= pair[1].timestamp {
                return Err(Error::InvalidGrid(format!(
                    "grids not strictly ordered: {} then {}",
                    pair[0].timestamp, pair[1].timestamp
                )));
            }
        }
        Ok(AoiMonthStack {
            aoi_id: aoi_id.into(),
            year_month,
            grids,
        })
    }

    pub fn grids(&self) -> &[RasterGrid] {
        &self.grids
    }

    pub fn len(&self) -> usize {
        self.grids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grids.is_empty()
    }

    fn first(&self) -> Result<&RasterGrid> {
        self.grids.first().ok_or(Error::EmptyStack)
    }
}

/// How the NTL standard deviation is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum NtlStdMode {
    /// Across pixels of the monthly median composite.
    #[default]
    Spatial,
    /// Across the daily AOI means.
    Temporal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NtlStats {
    pub mean: f64,
    pub max: f64,
    pub std: f64,
}

/// Monthly satellite features for one AOI. `None` marks a missing feature.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SatFeatures {
    pub sar_diff_median: Option<f64>,
    pub vh_median_mean: Option<f64>,
    pub ntl_mean: Option<f64>,
    pub ntl_max: Option<f64>,
    pub ntl_std: Option<f64>,
    pub lit_area_ratio: Option<f64>,
    pub n_obs_vv: usize,
    pub n_obs_vh: usize,
    pub n_obs_ntl: usize,
}

impl SatFeatures {
    pub const NAMES: [&'static str; 6] = [
        "sar_diff_median",
        "vh_median_mean",
        "ntl_mean",
        "ntl_max",
        "ntl_std",
        "lit_area_ratio",
    ];

    pub fn values(&self) -> [Option<f64>; 6] {
        [
            self.sar_diff_median,
            self.vh_median_mean,
            self.ntl_mean,
            self.ntl_max,
            self.ntl_std,
            self.lit_area_ratio,
        ]
    }

    pub fn all_missing(&self) -> bool {
        self.values().iter().all(Option::is_none)
    }

    /// Computes every feature the available stacks support. Stacks that
    /// violate a precondition yield missing features, not errors.
    pub fn compute(
        vv: Option<&AoiMonthStack>,
        vh: Option<&AoiMonthStack>,
        ntl: Option<&AoiMonthStack>,
        tau: f64,
        mode: NtlStdMode,
    ) -> SatFeatures {
        let mut out = SatFeatures::default();
        if let Some(s) = vv {
            out.n_obs_vv = s.len();
            out.sar_diff_median = soften(vv_diff_median(s), "sar_diff_median", s).flatten();
        }
        if let Some(s) = vh {
            out.n_obs_vh = s.len();
            out.vh_median_mean = soften(vh_backscatter(s), "vh_median_mean", s);
        }
        if let Some(s) = ntl {
            out.n_obs_ntl = s.len();
            if let Some(st) = soften(ntl_stats(s, mode), "ntl_stats", s) {
                out.ntl_mean = Some(st.mean);
                out.ntl_max = Some(st.max);
                out.ntl_std = Some(st.std);
            }
            out.lit_area_ratio = soften(lit_area_ratio(s, tau), "lit_area_ratio", s);
        }
        out
    }
}

fn soften<T>(r: Result<T>, what: &str, stack: &AoiMonthStack) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            log::debug!("{} {} {what}: {e}", stack.aoi_id, stack.year_month);
            None
        }
    }
}

/// Median with the even-count rule (mean of the two central values).
/// Reorders `values`; returns `None` when empty.
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

fn db(value: f64) -> f64 {
    10.0 * (value + DB_EPSILON).log10()
}

/// Converts linear intensity to decibels pixel by pixel.
pub fn to_db(grid: &RasterGrid) -> Result<RasterGrid> {
    if let Some((index, &value)) = grid
        .values
        .iter()
        .enumerate()
        .find(|(i, v)| !grid.nodata[*i] && **v < 0.0)
    {
        return Err(Error::NegativeRadiance { index, value });
    }
    Ok(grid.map_valid(db))
}

/// Sum of absolute pixel differences over pixels valid in both grids.
pub fn abs_diff_sum(g1: &RasterGrid, g2: &RasterGrid) -> Result<f64> {
    g1.same_shape(g2)?;
    let mut sum = 0.0;
    let mut joint = 0usize;
    for i in 0..g1.len() {
        if g1.nodata[i] || g2.nodata[i] {
            continue;
        }
        sum += (g2.values[i] - g1.values[i]).abs();
        joint += 1;
    }
    if joint == 0 {
        return Err(Error::NoValidPixels("abs_diff_sum"));
    }
    Ok(sum)
}

/// Median of consecutive-pair dB difference sums within the month.
///
/// `Ok(None)` when fewer than two grids (or no pair with shared pixels)
/// are available.
pub fn vv_diff_median(stack: &AoiMonthStack) -> Result<Option<f64>> {
    if stack.len() < 2 {
        return Ok(None);
    }
    let db_grids = stack.grids.iter().map(to_db).collect::<Result<Vec<_>>>()?;
    let mut diffs = Vec::with_capacity(db_grids.len() - 1);
    for pair in db_grids.windows(2) {
        match abs_diff_sum(&pair[0], &pair[1]) {
            Ok(d) => diffs.push(d),
            Err(Error::NoValidPixels(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(median(&mut diffs))
}

fn pixelwise(stack: &AoiMonthStack, reduce: impl Fn(&mut [f64]) -> f64) -> Result<RasterGrid> {
    let first = stack.first()?;
    let n = first.len();
    let mut values = Vec::with_capacity(n);
    let mut nodata = Vec::with_capacity(n);
    let mut series = Vec::with_capacity(stack.len());
    for i in 0..n {
        series.clear();
        series.extend(stack.grids.iter().filter_map(|g| g.get(i)));
        if series.is_empty() {
            values.push(f64::NAN);
            nodata.push(true);
        } else {
            values.push(reduce(&mut series));
            nodata.push(false);
        }
    }
    Ok(RasterGrid {
        width: first.width,
        height: first.height,
        values,
        nodata,
        timestamp: first.timestamp,
    })
}

/// Per-pixel temporal median. A pixel is nodata only if it is nodata on every date.
pub fn pixelwise_median(stack: &AoiMonthStack) -> Result<RasterGrid> {
    pixelwise(stack, |s| median(s).expect("non-empty series"))
}

/// Per-pixel temporal maximum.
pub fn pixelwise_max(stack: &AoiMonthStack) -> Result<RasterGrid> {
    pixelwise(stack, |s| s.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

fn spatial_mean(grid: &RasterGrid) -> Option<f64> {
    let n = grid.valid_count();
    (n > 0).then(|| grid.valid_values().sum::<f64>() / n as f64)
}

/// Mean dB backscatter of the monthly median composite.
pub fn vh_backscatter(stack: &AoiMonthStack) -> Result<f64> {
    let composite = to_db(&pixelwise_median(stack)?)?;
    spatial_mean(&composite).ok_or(Error::NoValidPixels("vh_backscatter"))
}

fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Mean, max and population standard deviation of nighttime radiance.
///
/// The monthly median composite is floored at zero before any statistic.
pub fn ntl_stats(stack: &AoiMonthStack, mode: NtlStdMode) -> Result<NtlStats> {
    let composite = pixelwise_median(stack)?.map_valid(|v| v.max(0.0));
    let pixels: Vec<f64> = composite.valid_values().collect();
    if pixels.is_empty() {
        return Err(Error::NoValidPixels("ntl_stats"));
    }
    let mean = pixels.iter().sum::<f64>() / pixels.len() as f64;
    let max = pixels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let std = match mode {
        NtlStdMode::Spatial => population_std(&pixels),
        NtlStdMode::Temporal => {
            let daily: Vec<f64> = stack
                .grids
                .iter()
                .filter_map(|g| spatial_mean(&g.map_valid(|v| v.max(0.0))))
                .collect();
            population_std(&daily)
        }
    };
    Ok(NtlStats { mean, max, std })
}

/// Share of pixels whose monthly median radiance is strictly above `tau`.
pub fn lit_area_ratio(stack: &AoiMonthStack, tau: f64) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidArgument(format!("lit threshold {tau} must be >= 0")));
    }
    let composite = pixelwise_median(stack)?;
    let n = composite.valid_count();
    if n == 0 {
        return Err(Error::NoValidPixels("lit_area_ratio"));
    }
    let lit = composite.valid_values().filter(|v| *v > tau).count();
    Ok(lit as f64 / n as f64)
}
