//! Port-month analysis table: joins, target transforms, filters and splits.

mod io;
mod wpi;

pub use io::{read_panel_csv, read_trade_csv, write_panel_csv, PANEL_KEY_COLUMNS};
pub use wpi::{
    encode_wpi, parse_attr, read_wpi_csv, schema_kind, wpi_feature_names, AttrKind, AttrValue,
    HarborSize, Ternary, WpiRecord, WPI_SCHEMA,
};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::month::YearMonth;
use crate::raster::{FeatureRow, SatFeatures};

/// Which feature blocks enter the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureSpec {
    #[serde(rename = "sat")]
    Sat,
    #[serde(rename = "port")]
    Port,
    #[serde(rename = "sat+port")]
    SatPort,
}

impl FeatureSpec {
    pub fn uses_sat(self) -> bool {
        matches!(self, FeatureSpec::Sat | FeatureSpec::SatPort)
    }

    pub fn uses_port(self) -> bool {
        matches!(self, FeatureSpec::Port | FeatureSpec::SatPort)
    }
}

impl fmt::Display for FeatureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureSpec::Sat => "sat",
            FeatureSpec::Port => "port",
            FeatureSpec::SatPort => "sat+port",
        })
    }
}

impl FromStr for FeatureSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sat" => Ok(FeatureSpec::Sat),
            "port" => Ok(FeatureSpec::Port),
            "sat+port" | "port+sat" => Ok(FeatureSpec::SatPort),
            _ => Err(Error::InvalidArgument(format!("unknown spec {s:?} (sat, port, sat+port)"))),
        }
    }
}

/// Log-scale target column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Value,
    Weight,
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::Value => "value",
            Target::Weight => "weight",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeRecord {
    pub port_id: String,
    pub year_month: YearMonth,
    pub trade_value: f64,
    pub trade_weight: f64,
}

/// One port-month observation. Missing feature values are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelRow {
    pub port_id: String,
    pub year_month: YearMonth,
    pub region: Option<String>,
    pub harbor_size: Option<HarborSize>,
    pub y_value_log: f64,
    pub y_weight_log: f64,
    pub features: Vec<f64>,
}

impl PanelRow {
    pub fn target(&self, target: Target) -> f64 {
        match target {
            Target::Value => self.y_value_log,
            Target::Weight => self.y_weight_log,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub feature_names: Vec<String>,
    /// Names of the satellite-derived columns (a subset of `feature_names`).
    pub sat_columns: Vec<String>,
    pub rows: Vec<PanelRow>,
}

impl Panel {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn with_rows(&self, rows: Vec<PanelRow>) -> Panel {
        Panel {
            feature_names: self.feature_names.clone(),
            sat_columns: self.sat_columns.clone(),
            rows,
        }
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.feature_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Schema(format!("unknown column {name:?}")))
    }

    /// Distinct months in calendar order.
    pub fn months(&self) -> Vec<YearMonth> {
        self.rows
            .iter()
            .map(|r| r.year_month)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn ports(&self) -> BTreeSet<&str> {
        self.rows.iter().map(|r| r.port_id.as_str()).collect()
    }

    /// Row-major feature matrix.
    pub fn matrix(&self) -> Vec<f64> {
        self.rows.iter().flat_map(|r| r.features.iter().copied()).collect()
    }

    pub fn targets(&self, target: Target) -> Vec<f64> {
        self.rows.iter().map(|r| r.target(target)).collect()
    }
}

/// Natural log of `1 + x` for nonnegative `x`.
pub fn log1p(x: f64) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::InvalidArgument(format!("log1p needs a finite x >= 0, got {x}")));
    }
    Ok(x.ln_1p())
}

/// Inner-joins trade records with the feature blocks selected by `spec`.
///
/// Satellite-bearing specs drop port-months without any satellite feature.
/// Port-bearing specs drop ports absent from the WPI table. When the WPI
/// record is available it also supplies the row's region and size class.
pub fn assemble_panel(
    sat_rows: &[FeatureRow],
    wpi_table: &[WpiRecord],
    trade_table: &[TradeRecord],
    spec: FeatureSpec,
) -> Result<Panel> {
    let mut sat: HashMap<(&str, YearMonth), &SatFeatures> = HashMap::new();
    for r in sat_rows {
        if sat.insert((r.aoi_id.as_str(), r.year_month), &r.features).is_some() {
            return Err(Error::Schema(format!("duplicate features for {} {}", r.aoi_id, r.year_month)));
        }
    }
    let mut wpi: HashMap<&str, (&WpiRecord, Vec<f64>)> = HashMap::new();
    for w in wpi_table {
        let encoded = encode_wpi(w)?;
        if wpi.insert(w.port_id.as_str(), (w, encoded)).is_some() {
            return Err(Error::Schema(format!("duplicate WPI port {}", w.port_id)));
        }
    }

    let mut trade: BTreeMap<(&str, YearMonth), &TradeRecord> = BTreeMap::new();
    for t in trade_table {
        if trade.insert((t.port_id.as_str(), t.year_month), t).is_some() {
            return Err(Error::Schema(format!("duplicate trade record {} {}", t.port_id, t.year_month)));
        }
    }

    let mut feature_names: Vec<String> = Vec::new();
    let mut sat_columns = Vec::new();
    if spec.uses_sat() {
        sat_columns = SatFeatures::NAMES.iter().map(|s| s.to_string()).collect();
        feature_names.extend(sat_columns.iter().cloned());
    }
    if spec.uses_port() {
        feature_names.extend(wpi_feature_names().map(String::from));
    }

    let (mut no_sat, mut no_wpi) = (0usize, 0usize);
    let mut rows = Vec::new();
    for ((port, month), t) in trade {
        let mut features = Vec::with_capacity(feature_names.len());
        if spec.uses_sat() {
            match sat.get(&(port, month)) {
                Some(f) if !f.all_missing() => {
                    features.extend(f.values().iter().map(|v| v.unwrap_or(f64::NAN)))
                }
                _ => {
                    no_sat += 1;
                    continue;
                }
            }
        }
        let port_info = wpi.get(port);
        if spec.uses_port() {
            match port_info {
                Some((_, encoded)) => features.extend_from_slice(encoded),
                None => {
                    no_wpi += 1;
                    continue;
                }
            }
        }
        rows.push(PanelRow {
            port_id: port.to_string(),
            year_month: month,
            region: port_info.map(|(w, _)| w.region.clone()),
            harbor_size: port_info.map(|(w, _)| w.harbor_size),
            y_value_log: log1p(t.trade_value)?,
            y_weight_log: log1p(t.trade_weight)?,
            features,
        });
    }
    log::info!(
        "panel ({spec}): {} rows kept, {no_sat} dropped without satellite data, {no_wpi} dropped without WPI record",
        rows.len()
    );
    if rows.is_empty() {
        return Err(Error::Empty("panel join produced no rows".into()));
    }
    Ok(Panel {
        feature_names,
        sat_columns,
        rows,
    })
}

/// Number of training months: `ceil(fraction * months)`, kept within `1..months`.
pub fn train_month_count(n_months: usize, fraction: f64) -> usize {
    // Guard the ceiling against representation error (0.7 * 10 = 7.000000000000001).
    let raw = (fraction * n_months as f64 - 1e-9).ceil() as usize;
    raw.clamp(1, n_months - 1)
}

/// Temporal split on distinct calendar months.
pub fn chrono_split(panel: &Panel, train_fraction: f64) -> Result<(Panel, Panel)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("train fraction {train_fraction} not in (0,1)")));
    }
    let months = panel.months();
    if months.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "chronological split needs at least 2 distinct months, found {}",
            months.len()
        )));
    }
    let first_test = months[train_month_count(months.len(), train_fraction)];
    let (train, test): (Vec<_>, Vec<_>) = panel
        .rows
        .iter()
        .cloned()
        .partition(|r| r.year_month < first_test);
    Ok((panel.with_rows(train), panel.with_rows(test)))
}

/// Keeps rows whose port size class is in `sizes`. Rows without a size
/// class survive only when every class is requested.
pub fn filter_size(panel: &Panel, sizes: &[HarborSize]) -> Result<Panel> {
    let all = HarborSize::ALL.iter().all(|s| sizes.contains(s));
    let rows: Vec<_> = panel
        .rows
        .iter()
        .filter(|r| match r.harbor_size {
            Some(s) => sizes.contains(&s),
            None => all,
        })
        .cloned()
        .collect();
    if rows.is_empty() {
        return Err(Error::Empty(format!("no rows with harbor size in {sizes:?}")));
    }
    Ok(panel.with_rows(rows))
}

/// Holds out every row of `region` as the test set.
pub fn leave_region_out(panel: &Panel, region: &str) -> Result<(Panel, Panel)> {
    let (test, train): (Vec<_>, Vec<_>) = panel
        .rows
        .iter()
        .cloned()
        .partition(|r| r.region.as_deref() == Some(region));
    if test.is_empty() {
        return Err(Error::RegionAbsent(region.to_string()));
    }
    let test_ports: BTreeSet<&str> = test.iter().map(|r| r.port_id.as_str()).collect();
    if let Some(r) = train.iter().find(|r| test_ports.contains(r.port_id.as_str())) {
        return Err(Error::PortOverlap(r.port_id.clone()));
    }
    Ok((panel.with_rows(train), panel.with_rows(test)))
}

/// Keeps ports observed in at least `min_coverage` of the calendar months
/// between `from` and `to` inclusive.
pub fn filter_coverage(panel: &Panel, from: YearMonth, to: YearMonth, min_coverage: f64) -> Result<Panel> {
    let span = from.span_to(to);
    if span == 0 {
        return Err(Error::InvalidArgument(format!("empty coverage window {from}..{to}")));
    }
    let mut seen: BTreeMap<&str, BTreeSet<YearMonth>> = BTreeMap::new();
    for r in &panel.rows {
        if r.year_month >= from && r.year_month <= to {
            seen.entry(&r.port_id).or_default().insert(r.year_month);
        }
    }
    let keep: BTreeSet<&str> = seen
        .into_iter()
        .filter(|(port, months)| {
            let cov = months.len() as f64 / span as f64;
            if cov < min_coverage {
                log::info!("dropping {port}: coverage {:.1}%", cov * 100.0);
            }
            cov >= min_coverage
        })
        .map(|(p, _)| p)
        .collect();
    let rows: Vec<_> = panel
        .rows
        .iter()
        .filter(|r| keep.contains(r.port_id.as_str()))
        .cloned()
        .collect();
    if rows.is_empty() {
        return Err(Error::Empty(format!("no port reaches {min_coverage} coverage")));
    }
    Ok(panel.with_rows(rows))
}
