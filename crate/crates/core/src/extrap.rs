//! Level anchoring and pre/post change estimation for ports outside the
//! training domain.
//!
//! Anchoring shifts a port's predicted series by the gap between its
//! prediction and observation in the anchor month. The change estimate
//! `mean(post) - mean(pre)` does not depend on the level at all, so any
//! port-specific constant in the predictions cancels.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::PredictionRow;
use crate::month::YearMonth;

/// A port's monthly predictions (log scale), ordered by month.
#[derive(Debug, Clone, PartialEq)]
pub struct PortSeries {
    pub port_id: String,
    pub months: Vec<YearMonth>,
    pub values: Vec<f64>,
}

impl PortSeries {
    pub fn new(port_id: impl Into<String>, months: Vec<YearMonth>, values: Vec<f64>) -> Result<Self> {
        if months.len() != values.len() {
            return Err(Error::InvalidArgument("months and values differ in length".into()));
        }
        if months.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("series months must be strictly increasing".into()));
        }
        Ok(PortSeries {
            port_id: port_id.into(),
            months,
            values,
        })
    }

    pub fn shifted(&self, c: f64) -> PortSeries {
        PortSeries {
            values: self.values.iter().map(|v| v + c).collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnchoredSeries {
    pub raw: PortSeries,
    pub anchor_month: YearMonth,
    pub observed_first: f64,
    /// `raw[anchor] - observed[anchor]`.
    pub offset: f64,
    pub anchored_pred: Vec<f64>,
}

impl AnchoredSeries {
    /// Change estimate of the anchored series. The offset is constant, so
    /// this is evaluated on the raw component and is bit-identical to the
    /// unanchored estimate.
    pub fn pct_change(&self, window: &ChangeWindow) -> Result<ChangeEstimate> {
        pct_change(&self.raw, window)
    }

    pub fn anchored(&self) -> PortSeries {
        PortSeries {
            values: self.anchored_pred.clone(),
            ..self.raw.clone()
        }
    }
}

fn anchor_at(series: &PortSeries, index: usize, observed: f64) -> Result<AnchoredSeries> {
    if !observed.is_finite() {
        return Err(Error::AnchorUnavailable(series.port_id.clone()));
    }
    let offset = series.values[index] - observed;
    let mut anchored_pred: Vec<f64> = series.values.iter().map(|v| v - offset).collect();
    // Pin the anchor month to the observation; the subtraction above may round.
    anchored_pred[index] = observed;
    Ok(AnchoredSeries {
        raw: series.clone(),
        anchor_month: series.months[index],
        observed_first: observed,
        offset,
        anchored_pred,
    })
}

/// Anchors the series at its first month using that month's observation.
pub fn anchor(series: &PortSeries, observed_first: f64) -> Result<AnchoredSeries> {
    if series.values.is_empty() {
        return Err(Error::AnchorUnavailable(series.port_id.clone()));
    }
    anchor_at(series, 0, observed_first)
}

/// Anchors at the earliest month that has both a prediction and an
/// observation. `observed` is aligned with the series months.
pub fn anchor_first_observed(series: &PortSeries, observed: &[Option<f64>]) -> Result<AnchoredSeries> {
    if observed.len() != series.values.len() {
        return Err(Error::InvalidArgument("observations not aligned with series".into()));
    }
    let (index, value) = observed
        .iter()
        .enumerate()
        .find_map(|(i, o)| o.filter(|v| v.is_finite()).map(|v| (i, v)))
        .ok_or_else(|| Error::AnchorUnavailable(series.port_id.clone()))?;
    anchor_at(series, index, value)
}

/// Inclusive pre and post month windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeWindow {
    pub pre_from: YearMonth,
    pub pre_to: YearMonth,
    pub post_from: YearMonth,
    pub post_to: YearMonth,
}

impl ChangeWindow {
    pub fn new(pre_from: YearMonth, pre_to: YearMonth, post_from: YearMonth, post_to: YearMonth) -> Result<Self> {
        if pre_from > pre_to || post_from > post_to {
            return Err(Error::InvalidArgument("window start after its end".into()));
        }
        if pre_to >= post_from {
            return Err(Error::InvalidArgument(format!(
                "pre window ({pre_from}..{pre_to}) must end before post window ({post_from}..{post_to})"
            )));
        }
        Ok(ChangeWindow {
            pre_from,
            pre_to,
            post_from,
            post_to,
        })
    }

    /// `pre_len` months ending just before `cutoff` and `post_len` months
    /// starting just after it; the cutoff month itself is excluded.
    pub fn around_cutoff(cutoff: YearMonth, pre_len: usize, post_len: usize) -> Result<Self> {
        if pre_len == 0 || post_len == 0 {
            return Err(Error::InvalidArgument("window lengths must be positive".into()));
        }
        Self::new(
            cutoff.offset(-(pre_len as i64)),
            cutoff.pred(),
            cutoff.succ(),
            cutoff.offset(post_len as i64),
        )
    }

    /// Sanctions-study defaults: cutoff 2022-02, pre 2017-01..2022-01,
    /// post 2022-03..2024-12.
    pub fn sanctions_default() -> Self {
        let ym = |y, m| YearMonth::new(y, m).unwrap();
        ChangeWindow::new(ym(2017, 1), ym(2022, 1), ym(2022, 3), ym(2024, 12)).unwrap()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChangeEstimate {
    pub port_id: String,
    pub window: ChangeWindow,
    /// `mean(post) - mean(pre)` on the log scale.
    pub delta_log: f64,
    /// `100 * delta_log` (log points).
    pub pct: f64,
    /// Percent change of mean levels, `100 * (mean(expm1 post) / mean(expm1 pre) - 1)`.
    pub pct_level: Option<f64>,
    pub n_pre: usize,
    pub n_post: usize,
}

/// Difference of window means of a log-scale series.
pub fn window_delta(pre: &[f64], post: &[f64]) -> Result<f64> {
    if pre.is_empty() || post.is_empty() {
        return Err(Error::Empty("change window has no observations".into()));
    }
    let m = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(m(post) - m(pre))
}

pub fn pct_change(series: &PortSeries, window: &ChangeWindow) -> Result<ChangeEstimate> {
    let pick = |from: YearMonth, to: YearMonth| -> Vec<f64> {
        series
            .months
            .iter()
            .zip(&series.values)
            .filter(|(m, _)| **m >= from && **m <= to)
            .map(|(_, v)| *v)
            .collect()
    };
    let pre = pick(window.pre_from, window.pre_to);
    let post = pick(window.post_from, window.post_to);
    let delta_log = window_delta(&pre, &post)
        .map_err(|_| Error::Empty(format!("{}: empty pre or post window", series.port_id)))?;
    let level = |v: &[f64]| v.iter().map(|x| x.exp_m1()).sum::<f64>() / v.len() as f64;
    let (lp, lq) = (level(&pre), level(&post));
    Ok(ChangeEstimate {
        port_id: series.port_id.clone(),
        window: *window,
        delta_log,
        pct: 100.0 * delta_log,
        pct_level: (lp != 0.0).then(|| 100.0 * (lq / lp - 1.0)),
        n_pre: pre.len(),
        n_post: post.len(),
    })
}

/// Groups prediction rows into per-port series (ports sorted by id) with
/// observations aligned to the series months.
pub fn series_by_port(rows: &[PredictionRow]) -> Result<Vec<(PortSeries, Vec<Option<f64>>)>> {
    let mut grouped: BTreeMap<&str, BTreeMap<YearMonth, (f64, Option<f64>)>> = BTreeMap::new();
    for r in rows {
        if grouped
            .entry(&r.port_id)
            .or_default()
            .insert(r.year_month, (r.predicted, r.actual))
            .is_some()
        {
            return Err(Error::Schema(format!("duplicate prediction for {} {}", r.port_id, r.year_month)));
        }
    }
    grouped
        .into_iter()
        .map(|(port, by_month)| {
            let months = by_month.keys().copied().collect();
            let values = by_month.values().map(|v| v.0).collect();
            let observed = by_month.values().map(|v| v.1).collect();
            Ok((PortSeries::new(port, months, values)?, observed))
        })
        .collect()
}

pub fn write_changes_csv<W: Write>(writer: W, changes: &[ChangeEstimate]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["port_id", "delta_log", "pct", "n_pre", "n_post", "pct_level"])?;
    for c in changes {
        w.write_record([
            c.port_id.clone(),
            c.delta_log.to_string(),
            c.pct.to_string(),
            c.n_pre.to_string(),
            c.n_post.to_string(),
            c.pct_level.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<changes>", e))?;
    Ok(())
}

pub fn write_anchored_csv<W: Write>(writer: W, series: &[(AnchoredSeries, Vec<Option<f64>>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["port_id", "year_month", "raw_pred", "anchored_pred", "observed", "offset"])?;
    for (a, observed) in series {
        for (i, m) in a.raw.months.iter().enumerate() {
            w.write_record([
                a.raw.port_id.clone(),
                m.to_string(),
                a.raw.values[i].to_string(),
                a.anchored_pred[i].to_string(),
                observed[i].map(|v| v.to_string()).unwrap_or_default(),
                a.offset.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<anchored>", e))?;
    Ok(())
}
