use std::collections::BTreeSet;
use std::io::{Read, Write};

use super::{log1p, Panel, PanelRow, TradeRecord};
use crate::error::{Error, Result};
use crate::raster::SatFeatures;

/// Leading `panel.csv` columns; feature columns follow.
pub const PANEL_KEY_COLUMNS: [&str; 6] = [
    "port_id",
    "year_month",
    "region",
    "harbor_size",
    "y_value_log",
    "y_weight_log",
];

fn fmt_f(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

fn parse_f(cell: &str, column: &str) -> Result<f64> {
    let c = cell.trim();
    if c.is_empty() {
        return Ok(f64::NAN);
    }
    c.parse()
        .map_err(|_| Error::Schema(format!("column {column}: {c:?} is not a number")))
}

pub fn read_trade_csv<R: Read>(reader: R) -> Result<Vec<TradeRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("trade.csv lacks column {name}")))
    };
    let cols = [col("port_id")?, col("year_month")?, col("trade_value")?, col("trade_weight")?];
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let t = TradeRecord {
            port_id: rec[cols[0]].trim().to_string(),
            year_month: rec[cols[1]].parse()?,
            trade_value: parse_f(&rec[cols[2]], "trade_value")?,
            trade_weight: parse_f(&rec[cols[3]], "trade_weight")?,
        };
        // Validates nonnegativity up front so bad rows fail with context.
        log1p(t.trade_value).and(log1p(t.trade_weight)).map_err(|_| {
            Error::Schema(format!("{} {}: trade values must be finite and >= 0", t.port_id, t.year_month))
        })?;
        if !seen.insert((t.port_id.clone(), t.year_month)) {
            return Err(Error::Schema(format!("duplicate trade record {} {}", t.port_id, t.year_month)));
        }
        out.push(t);
    }
    Ok(out)
}

pub fn write_panel_csv<W: Write>(writer: W, panel: &Panel) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let header: Vec<&str> = PANEL_KEY_COLUMNS
        .iter()
        .copied()
        .chain(panel.feature_names.iter().map(String::as_str))
        .collect();
    w.write_record(&header)?;
    for r in &panel.rows {
        let mut rec = vec![
            r.port_id.clone(),
            r.year_month.to_string(),
            r.region.clone().unwrap_or_default(),
            r.harbor_size.map(|s| s.label().to_string()).unwrap_or_default(),
            fmt_f(r.y_value_log),
            fmt_f(r.y_weight_log),
        ];
        rec.extend(r.features.iter().map(|v| fmt_f(*v)));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<panel>", e))?;
    Ok(())
}

pub fn read_panel_csv<R: Read>(reader: R) -> Result<Panel> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header.len() < PANEL_KEY_COLUMNS.len() || header[..PANEL_KEY_COLUMNS.len()] != PANEL_KEY_COLUMNS {
        return Err(Error::Schema(format!("panel header must start with {PANEL_KEY_COLUMNS:?}")));
    }
    let feature_names: Vec<String> = header[PANEL_KEY_COLUMNS.len()..].to_vec();
    let sat_columns = feature_names
        .iter()
        .filter(|n| SatFeatures::NAMES.contains(&n.as_str()))
        .cloned()
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let opt = |s: &str| (!s.is_empty()).then(|| s.to_string());
        let features = feature_names
            .iter()
            .enumerate()
            .map(|(i, n)| parse_f(&rec[PANEL_KEY_COLUMNS.len() + i], n))
            .collect::<Result<Vec<_>>>()?;
        rows.push(PanelRow {
            port_id: rec[0].to_string(),
            year_month: rec[1].parse()?,
            region: opt(&rec[2]),
            harbor_size: opt(&rec[3]).map(|s| s.parse()).transpose()?,
            y_value_log: parse_f(&rec[4], "y_value_log")?,
            y_weight_log: parse_f(&rec[5], "y_weight_log")?,
            features,
        });
    }
    Ok(Panel {
        feature_names,
        sat_columns,
        rows,
    })
}
