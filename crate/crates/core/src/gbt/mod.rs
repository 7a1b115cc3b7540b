//! Histogram-based gradient-boosted regression trees with squared-error
//! loss, learned missing-value directions and gain importances.
//!
//! Each round fits one tree to the gradients `prediction - target` (the
//! hessian is 1 under squared loss). Splits maximise
//!
//! ```text
//! gain = 1/2 [ G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - (G_L+G_R)^2/(H_L+H_R+lambda) ]
//! ```
//!
//! with rows whose feature is missing tried on both sides. Leaves output
//! `-G/(H+lambda)`, scaled by the learning rate when summed.

mod bins;
mod tree;

pub use tree::{Direction, Tree, TreeNode};

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use bins::BinMapper;
use tree::TreeBuilder;

/// Borrowed row-major feature matrix; NaN marks a missing entry.
#[derive(Debug, Clone, Copy)]
pub struct Matrix<'a> {
    values: &'a [f64],
    n_cols: usize,
}

impl<'a> Matrix<'a> {
    pub fn new(values: &'a [f64], n_cols: usize) -> Result<Self> {
        if n_cols == 0 || values.len() % n_cols != 0 {
            return Err(Error::InvalidArgument(format!(
                "{} values do not form rows of width {n_cols}",
                values.len()
            )));
        }
        Ok(Matrix { values, n_cols })
    }

    pub fn n_rows(&self) -> usize {
        self.values.len() / self.n_cols
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols + col]
    }

    pub fn row(&self, row: usize) -> &'a [f64] {
        &self.values[row * self.n_cols..(row + 1) * self.n_cols]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperParams {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// Minimum hessian sum per child (row count under squared loss).
    pub min_child_weight: f64,
    pub l2_reg: f64,
    pub subsample_rows: f64,
    pub subsample_cols: f64,
    pub n_bins: usize,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            n_rounds: 500,
            max_depth: 6,
            learning_rate: 0.05,
            min_child_weight: 5.0,
            l2_reg: 1.0,
            subsample_rows: 0.8,
            subsample_cols: 0.8,
            n_bins: 256,
            seed: 0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_rounds < 1 {
            return bad("n_rounds must be >= 1".into());
        }
        if self.max_depth < 1 {
            return bad("max_depth must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!("learning_rate {} not in (0,1]", self.learning_rate));
        }
        for (name, v) in [("subsample_rows", self.subsample_rows), ("subsample_cols", self.subsample_cols)] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(format!("{name} {v} not in (0,1]"));
            }
        }
        if !(self.l2_reg >= 0.0) || !(self.min_child_weight >= 0.0) {
            return bad("l2_reg and min_child_weight must be >= 0".into());
        }
        if !(2..=u16::MAX as usize).contains(&self.n_bins) {
            return bad(format!("n_bins {} not in [2, 65535]", self.n_bins));
        }
        Ok(())
    }
}

/// A fitted boosted ensemble. Prediction is
/// `base_score + sum(learning_rate * tree_output)`, accumulated in tree order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub base_score: f64,
    pub params: HyperParams,
    pub feature_names: Vec<String>,
    pub trees: Vec<Tree>,
}

fn base_score(y: &[f64]) -> f64 {
    let first = y[0];
    if y.iter().all(|v| *v == first) {
        return first;
    }
    y.iter().sum::<f64>() / y.len() as f64
}

fn draw(rng: &mut ChaCha8Rng, n: usize, fraction: f64) -> Vec<usize> {
    if fraction >= 1.0 {
        return (0..n).collect();
    }
    let k = ((fraction * n as f64).round() as usize).clamp(1, n);
    let mut idx = sample(rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}

/// Fits an ensemble; also returns the training mean squared error after
/// each round.
pub fn fit_traced(
    x: &Matrix<'_>,
    y: &[f64],
    feature_names: &[String],
    params: &HyperParams,
) -> Result<(TreeEnsemble, Vec<f64>)> {
    params.validate()?;
    let n = x.n_rows();
    if n != y.len() {
        return Err(Error::InvalidArgument(format!("{n} feature rows but {} targets", y.len())));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("need at least 2 training rows".into()));
    }
    if feature_names.len() != x.n_cols() {
        return Err(Error::InvalidArgument(format!(
            "{} feature names for {} columns",
            feature_names.len(),
            x.n_cols()
        )));
    }
    if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite target {bad}")));
    }
    let usable: Vec<usize> = (0..x.n_cols())
        .filter(|&f| (0..n).any(|r| !x.get(r, f).is_nan()))
        .collect();
    if usable.is_empty() {
        return Err(Error::InvalidArgument("no feature column has observed values".into()));
    }

    let mapper = BinMapper::fit(x, params.n_bins);
    let binned = mapper.transform(x);
    let base = base_score(y);
    let mut preds = vec![base; n];
    let hess = vec![1.0; n];
    let mut grad = vec![0.0; n];
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut trees = Vec::with_capacity(params.n_rounds);
    let mut trace = Vec::with_capacity(params.n_rounds);

    for _ in 0..params.n_rounds {
        for i in 0..n {
            grad[i] = preds[i] - y[i];
        }
        let rows: Vec<u32> = draw(&mut rng, n, params.subsample_rows)
            .into_iter()
            .map(|r| r as u32)
            .collect();
        let cols: Vec<usize> = draw(&mut rng, usable.len(), params.subsample_cols)
            .into_iter()
            .map(|i| usable[i])
            .collect();
        let builder = TreeBuilder {
            params,
            bins: &binned,
            mapper: &mapper,
            n_rows: n,
            grad: &grad,
            hess: &hess,
        };
        let built = builder.build(rows, &cols);
        for (i, p) in preds.iter_mut().enumerate() {
            *p += params.learning_rate * built.predict_binned(&binned, n, i);
        }
        trace.push(preds.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n as f64);
        trees.push(built.tree);
    }

    Ok((
        TreeEnsemble {
            base_score: base,
            params: params.clone(),
            feature_names: feature_names.to_vec(),
            trees,
        },
        trace,
    ))
}

pub fn fit(x: &Matrix<'_>, y: &[f64], feature_names: &[String], params: &HyperParams) -> Result<TreeEnsemble> {
    fit_traced(x, y, feature_names, params).map(|(m, _)| m)
}

impl TreeEnsemble {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut p = self.base_score;
        for t in &self.trees {
            p += self.params.learning_rate * t.predict_row(row);
        }
        p
    }

    /// Predicts every row; the matrix must have the training width.
    pub fn predict(&self, x: &Matrix<'_>) -> Result<Vec<f64>> {
        if x.n_cols() != self.feature_names.len() {
            return Err(Error::Schema(format!(
                "model expects {} features, got {}",
                self.feature_names.len(),
                x.n_cols()
            )));
        }
        Ok((0..x.n_rows()).map(|r| self.predict_row(x.row(r))).collect())
    }

    /// Predicts after checking the column names match the training schema.
    pub fn predict_named(&self, x: &Matrix<'_>, names: &[String]) -> Result<Vec<f64>> {
        if names != self.feature_names.as_slice() {
            return Err(Error::Schema("feature columns differ from the training schema".into()));
        }
        self.predict(x)
    }

    /// Per-feature share of the total split gain, in percent.
    ///
    /// An ensemble without any split yields zeros for every feature.
    pub fn gain_importance(&self) -> Vec<(String, f64)> {
        let mut totals = vec![0.0; self.feature_names.len()];
        for t in &self.trees {
            for (f, gain) in t.splits() {
                totals[f] += gain;
            }
        }
        let sum: f64 = totals.iter().sum();
        if sum <= 0.0 {
            log::warn!("ensemble has no splits; gain importances are all zero");
        }
        self.feature_names
            .iter()
            .zip(totals)
            .map(|(name, g)| (name.clone(), if sum > 0.0 { 100.0 * g / sum } else { 0.0 }))
            .collect()
    }

    pub fn importance_map(&self) -> BTreeMap<String, f64> {
        self.gain_importance().into_iter().collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: TreeEnsemble = serde_json::from_str(s)?;
        model.params.validate()?;
        for t in &model.trees {
            for node in &t.nodes {
                if let TreeNode::Split {
                    split_feature,
                    left,
                    right,
                    ..
                } = node
                {
                    if *split_feature >= model.feature_names.len()
                        || *left >= t.nodes.len()
                        || *right >= t.nodes.len()
                    {
                        return Err(Error::Schema("model node references out of range".into()));
                    }
                }
            }
        }
        Ok(model)
    }
}
