//! Test-set metrics, the satellite placebo shuffle and report artifacts.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::month::YearMonth;
use crate::panel::Panel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `None` when the actuals have zero variance.
    pub r2: Option<f64>,
    pub pearson_corr: Option<f64>,
    pub mae: f64,
    pub rmse: f64,
    /// `None` when every actual is zero.
    pub mape_pct: Option<f64>,
    pub n: usize,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Coefficient of determination with the population (no dof) convention.
pub fn r2_score(actual: &[f64], predicted: &[f64]) -> Option<f64> {
    let m = mean(actual);
    let ss_tot: f64 = actual.iter().map(|a| (a - m).powi(2)).sum();
    if ss_tot == 0.0 {
        return None;
    }
    let ss_res: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p).powi(2)).sum();
    Some(1.0 - ss_res / ss_tot)
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// OLS slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Some(sxy / sxx)
}

pub fn metrics(actual: &[f64], predicted: &[f64]) -> Result<Metrics> {
    if actual.len() != predicted.len() {
        return Err(Error::InvalidArgument(format!(
            "{} actuals vs {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::InvalidArgument("metrics need at least one pair".into()));
    }
    let n = actual.len() as f64;
    let mae = actual.iter().zip(predicted).map(|(a, p)| (a - p).abs()).sum::<f64>() / n;
    let rmse = (actual.iter().zip(predicted).map(|(a, p)| (a - p).powi(2)).sum::<f64>() / n).sqrt();
    let ape: Vec<f64> = actual
        .iter()
        .zip(predicted)
        .filter(|(a, _)| **a != 0.0)
        .map(|(a, p)| ((a - p) / a).abs())
        .collect();
    Ok(Metrics {
        r2: r2_score(actual, predicted),
        pearson_corr: pearson(actual, predicted),
        mae,
        rmse,
        mape_pct: (!ape.is_empty()).then(|| 100.0 * mean(&ape)),
        n: actual.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature: String,
    pub gain_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub spec: String,
    pub target: String,
    pub r2: Option<f64>,
    pub pearson_corr: Option<f64>,
    pub mae: f64,
    pub rmse: f64,
    pub mape_pct: Option<f64>,
    pub n_test: usize,
    pub importance: Vec<ImportanceEntry>,
}

impl EvalReport {
    pub fn new(spec: &str, target: &str, m: Metrics, importance: Vec<(String, f64)>) -> Self {
        let mut importance: Vec<ImportanceEntry> = importance
            .into_iter()
            .map(|(feature, gain_pct)| ImportanceEntry { feature, gain_pct })
            .collect();
        importance.sort_by(|a, b| b.gain_pct.total_cmp(&a.gain_pct).then(a.feature.cmp(&b.feature)));
        EvalReport {
            spec: spec.to_string(),
            target: target.to_string(),
            r2: m.r2,
            pearson_corr: m.pearson_corr,
            mae: m.mae,
            rmse: m.rmse,
            mape_pct: m.mape_pct,
            n_test: m.n,
            importance,
        }
    }
}

/// Seeded uniform permutation of `0..n`.
pub fn row_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    perm
}

pub fn invert_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

/// Row `i` of the result takes the listed columns from row `perm[i]`;
/// every other field stays in place.
pub fn permute_columns(panel: &Panel, columns: &[String], perm: &[usize]) -> Result<Panel> {
    if perm.len() != panel.len() {
        return Err(Error::InvalidArgument("permutation length differs from panel".into()));
    }
    let idx = columns
        .iter()
        .map(|c| panel.column_index(c))
        .collect::<Result<Vec<_>>>()?;
    let mut out = panel.clone();
    for (i, &src) in perm.iter().enumerate() {
        for &c in &idx {
            out.rows[i].features[c] = panel.rows[src].features[c];
        }
    }
    Ok(out)
}

/// Moves the satellite block (or any named columns) together across rows
/// with one seeded permutation, leaving targets and keys untouched.
pub fn placebo_shuffle(panel: &Panel, columns: &[String], seed: u64) -> Result<Panel> {
    permute_columns(panel, columns, &row_permutation(panel.len(), seed))
}

/// One port-month prediction on the log scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub port_id: String,
    pub year_month: YearMonth,
    pub actual: Option<f64>,
    pub predicted: f64,
}

pub fn write_predictions_csv<W: Write>(writer: W, rows: &[PredictionRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<predictions>", e))?;
    Ok(())
}

pub fn read_predictions_csv<R: Read>(reader: R) -> Result<Vec<PredictionRow>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregatePoint {
    pub year_month: YearMonth,
    pub actual_sum: f64,
    pub predicted_sum: f64,
    /// `(actual - predicted) / actual * 100`; empty when the actual sum is 0.
    pub pct_error: Option<f64>,
}

/// Monthly totals in levels: log predictions are mapped back with `expm1`
/// and summed over ports. Rows without an actual value are skipped.
pub fn aggregate_timeseries(rows: &[PredictionRow]) -> Vec<AggregatePoint> {
    let mut by_month: BTreeMap<YearMonth, (f64, f64)> = BTreeMap::new();
    for r in rows {
        if let Some(a) = r.actual {
            let e = by_month.entry(r.year_month).or_default();
            e.0 += a.exp_m1();
            e.1 += r.predicted.exp_m1();
        }
    }
    by_month
        .into_iter()
        .map(|(year_month, (a, p))| AggregatePoint {
            year_month,
            actual_sum: a,
            predicted_sum: p,
            pct_error: (a != 0.0).then(|| (a - p) / a * 100.0),
        })
        .collect()
}

pub fn write_aggregate_csv<W: Write>(writer: W, points: &[AggregatePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for p in points {
        w.serialize(p)?;
    }
    w.flush().map_err(|e| Error::io("<aggregate>", e))?;
    Ok(())
}
