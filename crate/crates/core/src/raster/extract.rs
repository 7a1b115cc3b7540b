use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;

use super::{read_rgrid, AoiMonthStack, NtlStdMode, SatFeatures, DEFAULT_LIT_THRESHOLD};
use crate::error::{Error, Result};
use crate::month::YearMonth;

pub const FEATURES_HEADER: [&str; 11] = [
    "aoi_id",
    "year_month",
    "sar_diff_median",
    "vh_median_mean",
    "ntl_mean",
    "ntl_max",
    "ntl_std",
    "lit_area_ratio",
    "n_obs_vv",
    "n_obs_vh",
    "n_obs_ntl",
];

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct ExtractOptions {
    pub tau: f64,
    pub ntl_std_mode: NtlStdMode,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            tau: DEFAULT_LIT_THRESHOLD,
            ntl_std_mode: NtlStdMode::Spatial,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub aoi_id: String,
    pub year_month: YearMonth,
    pub features: SatFeatures,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Band {
    Vv,
    Vh,
    Ntl,
}

impl Band {
    fn parse(name: &str) -> Option<Band> {
        match name {
            "vv" => Some(Band::Vv),
            "vh" => Some(Band::Vh),
            "ntl" => Some(Band::Ntl),
            _ => None,
        }
    }
}

type Listing = BTreeMap<(String, YearMonth), BTreeMap<Band, Vec<(NaiveDate, PathBuf)>>>;

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

fn list_rasters(root: &Path) -> Result<Listing> {
    let mut listing = Listing::new();
    for aoi_dir in read_dir_sorted(root)?.into_iter().filter(|p| p.is_dir()) {
        let aoi = aoi_dir.file_name().unwrap().to_string_lossy().into_owned();
        for band_dir in read_dir_sorted(&aoi_dir)?.into_iter().filter(|p| p.is_dir()) {
            let band_name = band_dir.file_name().unwrap().to_string_lossy().into_owned();
            let Some(band) = Band::parse(&band_name) else {
                log::warn!("ignoring unknown band directory {}", band_dir.display());
                continue;
            };
            for file in read_dir_sorted(&band_dir)? {
                if file.extension().and_then(|e| e.to_str()) != Some("rgrd") {
                    continue;
                }
                let stem = file.file_stem().unwrap().to_string_lossy();
                let Ok(date) = NaiveDate::parse_from_str(&stem, "%Y-%m-%d") else {
                    log::warn!("skipping {}: file name is not a YYYY-MM-DD date", file.display());
                    continue;
                };
                listing
                    .entry((aoi.clone(), YearMonth::of(date)))
                    .or_default()
                    .entry(band)
                    .or_default()
                    .push((date, file));
            }
        }
    }
    Ok(listing)
}

fn load_stack(aoi: &str, month: YearMonth, files: &[(NaiveDate, PathBuf)]) -> Option<AoiMonthStack> {
    let mut files = files.to_vec();
    files.sort();
    let grids: Vec<_> = files
        .iter()
        .filter_map(|(date, path)| match read_rgrid(path, *date) {
            Ok(g) => Some(g),
            Err(e) => {
                log::warn!("skipping raster: {e}");
                None
            }
        })
        .collect();
    if grids.is_empty() {
        return None;
    }
    match AoiMonthStack::new(aoi, month, grids) {
        Ok(s) => Some(s),
        Err(e) => {
            log::warn!("{aoi} {month}: unusable stack: {e}");
            None
        }
    }
}

/// Walks `<root>/<aoi_id>/<band>/<YYYY-MM-DD>.rgrd` and reduces each
/// AOI-month to one feature row. Rows are ordered by (aoi_id, month).
pub fn extract_features(root: &Path, opts: &ExtractOptions) -> Result<Vec<FeatureRow>> {
    let listing: Vec<_> = list_rasters(root)?.into_iter().collect();
    let rows: Vec<FeatureRow> = listing
        .par_iter()
        .filter_map(|((aoi, month), bands)| {
            let stack = |b| bands.get(&b).and_then(|f| load_stack(aoi, *month, f));
            let (vv, vh, ntl) = (stack(Band::Vv), stack(Band::Vh), stack(Band::Ntl));
            if vv.is_none() && vh.is_none() && ntl.is_none() {
                return None;
            }
            let features = SatFeatures::compute(
                vv.as_ref(),
                vh.as_ref(),
                ntl.as_ref(),
                opts.tau,
                opts.ntl_std_mode,
            );
            Some(FeatureRow {
                aoi_id: aoi.clone(),
                year_month: *month,
                features,
            })
        })
        .collect();
    if rows.is_empty() {
        return Err(Error::Empty(format!("no readable rasters under {}", root.display())));
    }
    Ok(rows)
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub(crate) fn parse_opt(field: &str, column: &str) -> Result<Option<f64>> {
    let f = field.trim();
    if f.is_empty() {
        return Ok(None);
    }
    f.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Schema(format!("column {column}: {f:?} is not a number")))
}

pub fn write_features_csv<W: Write>(writer: W, rows: &[FeatureRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(FEATURES_HEADER)?;
    for r in rows {
        let f = &r.features;
        let mut rec = vec![r.aoi_id.clone(), r.year_month.to_string()];
        rec.extend(f.values().iter().map(|v| fmt_opt(*v)));
        rec.extend([f.n_obs_vv, f.n_obs_vh, f.n_obs_ntl].map(|n| n.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<features>", e))?;
    Ok(())
}

pub fn read_features_csv<R: Read>(reader: R) -> Result<Vec<FeatureRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != FEATURES_HEADER {
        return Err(Error::Schema(format!("unexpected features header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let v = |i: usize| parse_opt(&rec[i], FEATURES_HEADER[i]);
        let n = |i: usize| {
            rec[i]
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::Schema(format!("column {}: bad count {:?}", FEATURES_HEADER[i], &rec[i])))
        };
        rows.push(FeatureRow {
            aoi_id: rec[0].to_string(),
            year_month: rec[1].parse()?,
            features: SatFeatures {
                sar_diff_median: v(2)?,
                vh_median_mean: v(3)?,
                ntl_mean: v(4)?,
                ntl_max: v(5)?,
                ntl_std: v(6)?,
                lit_area_ratio: v(7)?,
                n_obs_vv: n(8)?,
                n_obs_vh: n(9)?,
                n_obs_ntl: n(10)?,
            },
        });
    }
    Ok(rows)
}
