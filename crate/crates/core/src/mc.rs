//! Monte Carlo check of level extrapolation versus anchoring and
//! differencing under port fixed effects.
//!
//! Outcomes follow `Y_it = alpha_i + beta * X_it + eps_it`, with training
//! and test ports drawing `alpha_i` from disjoint ranges. A model trained on
//! `X` alone cannot recover the test ports' levels, but the anchored series
//! and the pre/post differences do not depend on `alpha_i`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{ols_slope, pearson, r2_score, row_permutation};
use crate::extrap::window_delta;
use crate::gbt::{self, HyperParams, Matrix};
use crate::month::YearMonth;
use crate::panel::{Panel, PanelRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McConfig {
    pub n_train_ports: usize,
    pub n_test_ports: usize,
    pub alpha_train_range: [f64; 2],
    pub alpha_test_range: [f64; 2],
    pub n_months: usize,
    pub n_reps: usize,
    pub beta: f64,
    pub noise_sd: f64,
    /// `X_it = x_mean + x_trend_i * (t/(T-1) - 1/2) + x_sd * z_it`, with the
    /// port drift `x_trend_i ~ Normal(0, x_trend_sd)`.
    pub x_mean: f64,
    pub x_sd: f64,
    pub x_trend_sd: f64,
    /// First month of the post window; earlier months form the pre window.
    pub cutoff_month: usize,
    pub master_seed: u64,
    /// Placebo: permute X across rows before fitting and predicting.
    pub shuffle_x: bool,
    pub model: HyperParams,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_train_ports: 30,
            n_test_ports: 20,
            alpha_train_range: [12.0, 18.0],
            alpha_test_range: [6.0, 10.0],
            n_months: 100,
            n_reps: 100,
            beta: 1.0,
            noise_sd: 0.3,
            x_mean: 0.0,
            x_sd: 2.0,
            x_trend_sd: 2.0,
            cutoff_month: 50,
            master_seed: 20_220_224,
            shuffle_x: false,
            model: HyperParams::default(),
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_train_ports == 0 || self.n_test_ports < 2 || self.n_reps == 0 {
            return bad("port and replication counts must be positive (at least 2 test ports)");
        }
        if self.n_months < 2 || self.cutoff_month == 0 || self.cutoff_month >= self.n_months {
            return bad("cutoff_month must split n_months into two nonempty windows");
        }
        for r in [self.alpha_train_range, self.alpha_test_range] {
            if !(r[0] <= r[1]) || !r[0].is_finite() || !r[1].is_finite() {
                return bad("alpha ranges must be finite with lo <= hi");
            }
        }
        let (a, b) = (self.alpha_train_range, self.alpha_test_range);
        if a[0] <= b[1] && b[0] <= a[1] {
            return bad("train and test alpha ranges must be disjoint");
        }
        if !(self.noise_sd >= 0.0) || !(self.x_sd >= 0.0) || !(self.x_trend_sd >= 0.0) {
            return bad("standard deviations must be >= 0");
        }
        self.model.validate()
    }
}

/// Simulated data for one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRep {
    pub train: Panel,
    pub test: Panel,
    /// Per test port: `mean(Y post) - mean(Y pre)`, in port order.
    pub true_delta: Vec<(String, f64)>,
    pub alphas_test: Vec<f64>,
}

const FIRST_MONTH: (i32, u32) = (2000, 1);

/// Per-replication seed from the master seed and the replication counter.
pub fn rep_seed(master_seed: u64, rep: usize) -> u64 {
    // splitmix64 finaliser
    let mut z = master_seed ^ (rep as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn normal(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("validated sd")
}

fn simulate_group(
    cfg: &McConfig,
    rng: &mut ChaCha8Rng,
    prefix: &str,
    n_ports: usize,
    range: [f64; 2],
) -> (Vec<PanelRow>, Vec<(String, f64)>, Vec<f64>) {
    let start = YearMonth::new(FIRST_MONTH.0, FIRST_MONTH.1).unwrap();
    let (z, eps, trend) = (normal(cfg.x_sd), normal(cfg.noise_sd), normal(cfg.x_trend_sd));
    let span = (cfg.n_months - 1) as f64;
    let mut rows = Vec::with_capacity(n_ports * cfg.n_months);
    let mut deltas = Vec::with_capacity(n_ports);
    let mut alphas = Vec::with_capacity(n_ports);
    for p in 0..n_ports {
        let port_id = format!("{prefix}_{p:03}");
        let alpha = if range[0] == range[1] { range[0] } else { rng.random_range(range[0]..=range[1]) };
        let drift = trend.sample(rng);
        let mut ys = Vec::with_capacity(cfg.n_months);
        for t in 0..cfg.n_months {
            let x = cfg.x_mean + drift * (t as f64 / span - 0.5) + z.sample(rng);
            let y = alpha + cfg.beta * x + eps.sample(rng);
            ys.push(y);
            rows.push(PanelRow {
                port_id: port_id.clone(),
                year_month: start.offset(t as i64),
                region: Some(prefix.to_string()),
                harbor_size: None,
                y_value_log: y,
                y_weight_log: y,
                features: vec![x],
            });
        }
        let delta = window_delta(&ys[..cfg.cutoff_month], &ys[cfg.cutoff_month..]).expect("nonempty windows");
        deltas.push((port_id, delta));
        alphas.push(alpha);
    }
    (rows, deltas, alphas)
}

/// Draws the training and test panels for one replication.
pub fn simulate_rep(cfg: &McConfig, seed: u64) -> Result<SimRep> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (train_rows, _, _) = simulate_group(cfg, &mut rng, "train", cfg.n_train_ports, cfg.alpha_train_range);
    let (test_rows, true_delta, alphas_test) =
        simulate_group(cfg, &mut rng, "test", cfg.n_test_ports, cfg.alpha_test_range);
    let panel = |rows| Panel {
        feature_names: vec!["x".into()],
        sat_columns: vec!["x".into()],
        rows,
    };
    Ok(SimRep {
        train: panel(train_rows),
        test: panel(test_rows),
        true_delta,
        alphas_test,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepOutcome {
    pub rep: usize,
    pub raw_r2: f64,
    pub anchored_r2: f64,
    pub delta_slope: f64,
    pub delta_corr: f64,
    #[serde(skip)]
    pub deltas: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    fn of(v: &[f64]) -> MeanSd {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = if v.len() > 1 {
            v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        MeanSd { mean, sd: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub n_ok: usize,
    pub n_failed: usize,
    pub raw_r2: MeanSd,
    pub anchored_r2: MeanSd,
    pub delta_slope: MeanSd,
    pub delta_corr: MeanSd,
    /// Regression of predicted on true change pooling every port of every replication.
    pub pooled_delta_slope: f64,
    pub pooled_delta_corr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McResult {
    /// One entry per replication; `Err` holds the failure message.
    pub reps: Vec<std::result::Result<RepOutcome, String>>,
    pub summary: McSummary,
}

fn shuffle_x(panel: &mut Panel, seed: u64) {
    let perm = row_permutation(panel.len(), seed);
    let xs: Vec<f64> = panel.rows.iter().map(|r| r.features[0]).collect();
    for (row, src) in panel.rows.iter_mut().zip(perm) {
        row.features[0] = xs[src];
    }
}

fn run_rep(cfg: &McConfig, rep: usize) -> Result<RepOutcome> {
    let seed = rep_seed(cfg.master_seed, rep);
    let mut sim = simulate_rep(cfg, seed)?;
    if cfg.shuffle_x {
        shuffle_x(&mut sim.train, seed ^ 1);
        shuffle_x(&mut sim.test, seed ^ 2);
    }
    let params = HyperParams {
        seed,
        ..cfg.model.clone()
    };
    let x_train = sim.train.matrix();
    let model = gbt::fit(
        &Matrix::new(&x_train, 1)?,
        &sim.train.targets(crate::panel::Target::Value),
        &sim.train.feature_names,
        &params,
    )?;
    let x_test = sim.test.matrix();
    let pred = model.predict(&Matrix::new(&x_test, 1)?)?;
    let actual = sim.test.targets(crate::panel::Target::Value);

    let t = cfg.n_months;
    let mut anchored = Vec::with_capacity(pred.len());
    let mut deltas = Vec::with_capacity(cfg.n_test_ports);
    for (p, (_, true_delta)) in sim.true_delta.iter().enumerate() {
        let (yp, ya) = (&pred[p * t..(p + 1) * t], &actual[p * t..(p + 1) * t]);
        let offset = yp[0] - ya[0];
        anchored.push(ya[0]);
        anchored.extend(yp[1..].iter().map(|v| v - offset));
        let pred_delta = window_delta(&yp[..cfg.cutoff_month], &yp[cfg.cutoff_month..])?;
        deltas.push((*true_delta, pred_delta));
    }
    let (truth, predicted): (Vec<f64>, Vec<f64>) = deltas.iter().copied().unzip();
    let undefined = |what: &str| Error::Empty(format!("rep {rep}: {what} undefined"));
    Ok(RepOutcome {
        rep,
        raw_r2: r2_score(&actual, &pred).ok_or_else(|| undefined("raw r2"))?,
        anchored_r2: r2_score(&actual, &anchored).ok_or_else(|| undefined("anchored r2"))?,
        delta_slope: ols_slope(&truth, &predicted).ok_or_else(|| undefined("delta slope"))?,
        delta_corr: pearson(&truth, &predicted).ok_or_else(|| undefined("delta correlation"))?,
        deltas,
    })
}

/// Runs every replication in parallel; results are ordered by replication
/// and do not depend on the thread count.
pub fn run_mc(cfg: &McConfig) -> Result<McResult> {
    cfg.validate()?;
    let reps: Vec<std::result::Result<RepOutcome, String>> = (0..cfg.n_reps)
        .into_par_iter()
        .map(|rep| run_rep(cfg, rep).map_err(|e| e.to_string()))
        .collect();
    let ok: Vec<&RepOutcome> = reps.iter().filter_map(|r| r.as_ref().ok()).collect();
    let n_failed = reps.len() - ok.len();
    for r in reps.iter().filter_map(|r| r.as_ref().err()) {
        log::warn!("replication failed: {r}");
    }
    if (ok.len() as f64) < 0.95 * cfg.n_reps as f64 {
        return Err(Error::Empty(format!("{n_failed} of {} replications failed", cfg.n_reps)));
    }
    let col = |f: fn(&RepOutcome) -> f64| ok.iter().map(|r| f(r)).collect::<Vec<_>>();
    let (pooled_t, pooled_p): (Vec<f64>, Vec<f64>) = ok.iter().flat_map(|r| r.deltas.iter().copied()).unzip();
    let summary = McSummary {
        n_ok: ok.len(),
        n_failed,
        raw_r2: MeanSd::of(&col(|r| r.raw_r2)),
        anchored_r2: MeanSd::of(&col(|r| r.anchored_r2)),
        delta_slope: MeanSd::of(&col(|r| r.delta_slope)),
        delta_corr: MeanSd::of(&col(|r| r.delta_corr)),
        pooled_delta_slope: ols_slope(&pooled_t, &pooled_p).unwrap_or(f64::NAN),
        pooled_delta_corr: pearson(&pooled_t, &pooled_p).unwrap_or(f64::NAN),
    };
    Ok(McResult { reps, summary })
}

pub fn write_mc_results_csv<W: Write>(writer: W, result: &McResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["rep", "raw_r2", "anchored_r2", "delta_slope", "delta_corr"])?;
    for (i, r) in result.reps.iter().enumerate() {
        match r {
            Ok(o) => w.write_record([
                o.rep.to_string(),
                o.raw_r2.to_string(),
                o.anchored_r2.to_string(),
                o.delta_slope.to_string(),
                o.delta_corr.to_string(),
            ])?,
            Err(_) => w.write_record([i.to_string(), String::new(), String::new(), String::new(), String::new()])?,
        }
    }
    w.flush().map_err(|e| Error::io("<mc_results>", e))?;
    Ok(())
}

/// Plain-text table of the aggregate quantities.
pub fn summary_table(s: &McSummary) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<22}{:>10}{:>10}\n", "quantity", "mean", "sd"));
    for (name, v) in [
        ("raw_r2", s.raw_r2),
        ("anchored_r2", s.anchored_r2),
        ("delta_slope", s.delta_slope),
        ("delta_corr", s.delta_corr),
    ] {
        out.push_str(&format!("{:<22}{:>10.4}{:>10.4}\n", name, v.mean, v.sd));
    }
    out.push_str(&format!("{:<22}{:>10.4}\n", "pooled_delta_slope", s.pooled_delta_slope));
    out.push_str(&format!("{:<22}{:>10.4}\n", "pooled_delta_corr", s.pooled_delta_corr));
    out.push_str(&format!("replications: {} ok, {} failed\n", s.n_ok, s.n_failed));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> McConfig {
        McConfig {
            n_reps: 4,
            n_months: 20,
            cutoff_month: 10,
            model: HyperParams {
                n_rounds: 60,
                learning_rate: 0.2,
                ..HyperParams::default()
            },
            ..McConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(McConfig::default().validate().is_ok());
        let overlap = McConfig {
            alpha_test_range: [10.0, 13.0],
            ..McConfig::default()
        };
        assert!(overlap.validate().is_err());
        let cut = McConfig {
            cutoff_month: 100,
            ..McConfig::default()
        };
        assert!(cut.validate().is_err());
    }

    #[test]
    fn noiseless_flat_dgp() {
        let cfg = McConfig {
            noise_sd: 0.0,
            beta: 0.0,
            ..small()
        };
        let sim = simulate_rep(&cfg, 9).unwrap();
        for (row, i) in sim.test.rows.iter().zip(0..) {
            assert_eq!(row.y_value_log, sim.alphas_test[i / cfg.n_months]);
        }
        assert!(sim.true_delta.iter().all(|(_, d)| *d == 0.0));
    }

    #[test]
    fn test_support_is_disjoint() {
        let cfg = McConfig {
            noise_sd: 0.0,
            ..small()
        };
        let sim = simulate_rep(&cfg, 3).unwrap();
        let xs = |p: &Panel| p.rows.iter().map(|r| r.features[0]).collect::<Vec<_>>();
        let all_x: Vec<f64> = xs(&sim.train).into_iter().chain(xs(&sim.test)).collect();
        let (xmin, xmax) = all_x.iter().fold((f64::MAX, f64::MIN), |(a, b), x| (a.min(*x), b.max(*x)));
        for r in &sim.test.rows {
            assert!(r.y_value_log >= cfg.alpha_test_range[0] + cfg.beta * xmin - 1e-12);
            assert!(r.y_value_log <= cfg.alpha_test_range[1] + cfg.beta * xmax + 1e-12);
        }
        assert!(sim.alphas_test.iter().all(|a| (6.0..=10.0).contains(a)));
    }

    #[test]
    fn deterministic() {
        let cfg = small();
        assert_eq!(simulate_rep(&cfg, 42).unwrap(), simulate_rep(&cfg, 42).unwrap());
        assert_ne!(rep_seed(1, 0), rep_seed(1, 1));
        let a = run_mc(&cfg).unwrap();
        let b = run_mc(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.reps.len(), 4);
    }

    #[test]
    fn results_csv_has_one_row_per_rep() {
        let r = run_mc(&small()).unwrap();
        let mut buf = Vec::new();
        write_mc_results_csv(&mut buf, &r).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("rep,raw_r2,anchored_r2,delta_slope,delta_corr\n"));
    }

    #[test]
    fn noiseless_single_level_recovers_changes() {
        let cfg = McConfig {
            n_reps: 3,
            noise_sd: 0.0,
            alpha_train_range: [15.0, 15.0],
            // Enough training ports that the test X values stay inside the
            // training support; trees are flat beyond it.
            n_train_ports: 120,
            model: HyperParams {
                subsample_rows: 1.0,
                n_bins: 1024,
                min_child_weight: 1.0,
                ..HyperParams::default()
            },
            ..McConfig::default()
        };
        let s = run_mc(&cfg).unwrap().summary;
        assert!((s.delta_slope.mean - 1.0).abs() < 1e-3, "{s:?}");
        assert!((s.delta_corr.mean - 1.0).abs() < 1e-3, "{s:?}");
    }

    #[test]
    fn shuffled_x_destroys_the_signal() {
        let cfg = McConfig {
            n_reps: 8,
            shuffle_x: true,
            ..small()
        };
        let s = run_mc(&cfg).unwrap().summary;
        assert!(s.pooled_delta_corr.abs() < 0.2, "{s:?}");
    }
}