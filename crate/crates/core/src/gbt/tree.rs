use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bins::{BinMapper, MISSING_BIN};
use super::HyperParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Split {
        split_feature: usize,
        /// Values `<=` the threshold go left.
        split_threshold: f64,
        default_direction: Direction,
        split_gain: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        leaf_value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    /// Raw leaf output for one row; missing values follow the stored default.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { leaf_value } => return *leaf_value,
                TreeNode::Split {
                    split_feature,
                    split_threshold,
                    default_direction,
                    left,
                    right,
                    ..
                } => {
                    let v = row[*split_feature];
                    let go_left = if v.is_nan() {
                        *default_direction == Direction::Left
                    } else {
                        v <= *split_threshold
                    };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }

    fn predict_binned(&self, bins: &[u16], n_rows: usize, row: usize, cut_index: &[usize]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { leaf_value } => return *leaf_value,
                TreeNode::Split {
                    split_feature,
                    default_direction,
                    left,
                    right,
                    ..
                } => {
                    let b = bins[split_feature * n_rows + row];
                    let go_left = if b == MISSING_BIN {
                        *default_direction == Direction::Left
                    } else {
                        (b as usize) <= cut_index[i]
                    };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }

    pub fn splits(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            TreeNode::Split {
                split_feature,
                split_gain,
                ..
            } => Some((*split_feature, *split_gain)),
            TreeNode::Leaf { .. } => None,
        })
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Bucket {
    g: f64,
    h: f64,
}

struct SplitCandidate {
    feature: usize,
    cut: usize,
    gain: f64,
    default_left: bool,
}

pub(crate) struct TreeBuilder<'a> {
    pub params: &'a HyperParams,
    pub bins: &'a [u16],
    pub mapper: &'a BinMapper,
    pub n_rows: usize,
    pub grad: &'a [f64],
    pub hess: &'a [f64],
}

/// A fitted tree together with the bin index of each split's cut, which
/// lets the trainer update predictions from bin codes.
pub(crate) struct BuiltTree {
    pub tree: Tree,
    cut_index: Vec<usize>,
}

impl BuiltTree {
    pub fn predict_binned(&self, bins: &[u16], n_rows: usize, row: usize) -> f64 {
        self.tree.predict_binned(bins, n_rows, row, &self.cut_index)
    }
}

// Parallel histogram accumulation only pays off on larger nodes.
const PAR_WORK_THRESHOLD: usize = 1 << 16;

impl TreeBuilder<'_> {
    fn leaf_value(&self, g: f64, h: f64) -> f64 {
        -g / (h + self.params.l2_reg)
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.params.l2_reg)
    }

    fn best_for_feature(&self, feature: usize, rows: &[u32], g_tot: f64, h_tot: f64) -> Option<SplitCandidate> {
        let nb = self.mapper.n_bins(feature);
        if nb < 2 {
            return None;
        }
        let mut hist = vec![Bucket::default(); nb];
        let mut missing = Bucket::default();
        let col = &self.bins[feature * self.n_rows..(feature + 1) * self.n_rows];
        for &r in rows {
            let r = r as usize;
            let b = col[r];
            let slot = if b == MISSING_BIN { &mut missing } else { &mut hist[b as usize] };
            slot.g += self.grad[r];
            slot.h += self.hess[r];
        }
        let parent = self.score(g_tot, h_tot);
        let mcw = self.params.min_child_weight;
        let mut best: Option<SplitCandidate> = None;
        let (mut gl, mut hl) = (0.0, 0.0);
        for (cut, bucket) in hist.iter().enumerate().take(nb - 1) {
            gl += bucket.g;
            hl += bucket.h;
            let has_missing = missing.h > 0.0;
            let options: &[bool] = if has_missing { &[false, true] } else { &[false] };
            for &missing_left in options {
                let (g_l, h_l) = if missing_left { (gl + missing.g, hl + missing.h) } else { (gl, hl) };
                let (g_r, h_r) = (g_tot - g_l, h_tot - h_l);
                if h_l <= 0.0 || h_r <= 0.0 || h_l < mcw || h_r < mcw {
                    continue;
                }
                let gain = 0.5 * (self.score(g_l, h_l) + self.score(g_r, h_r) - parent);
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    // Without training rows to route, missing values follow the heavier child.
                    let default_left = if has_missing { missing_left } else { h_l >= h_r };
                    best = Some(SplitCandidate {
                        feature,
                        cut,
                        gain,
                        default_left,
                    });
                }
            }
        }
        best
    }

    fn find_split(&self, rows: &[u32], features: &[usize], g: f64, h: f64) -> Option<SplitCandidate> {
        let candidates: Vec<Option<SplitCandidate>> = if rows.len() * features.len() >= PAR_WORK_THRESHOLD {
            features
                .par_iter()
                .map(|&f| self.best_for_feature(f, rows, g, h))
                .collect()
        } else {
            features.iter().map(|&f| self.best_for_feature(f, rows, g, h)).collect()
        };
        // Reduce in feature order so ties resolve identically every run.
        candidates
            .into_iter()
            .flatten()
            .fold(None, |best: Option<SplitCandidate>, c| match best {
                Some(b) if b.gain >= c.gain => Some(b),
                _ => Some(c),
            })
            .filter(|c| c.gain > 0.0)
    }

    pub fn build(&self, rows: Vec<u32>, features: &[usize]) -> BuiltTree {
        let mut tree = Tree { nodes: Vec::new() };
        let mut cut_index = Vec::new();
        self.grow(&mut tree, &mut cut_index, rows, features, 0);
        BuiltTree { tree, cut_index }
    }

    fn grow(&self, tree: &mut Tree, cut_index: &mut Vec<usize>, rows: Vec<u32>, features: &[usize], depth: usize) -> usize {
        let (g, h) = rows.iter().fold((0.0, 0.0), |(g, h), &r| {
            (g + self.grad[r as usize], h + self.hess[r as usize])
        });
        let id = tree.nodes.len();
        tree.nodes.push(TreeNode::Leaf {
            leaf_value: self.leaf_value(g, h),
        });
        cut_index.push(usize::MAX);
        if depth >= self.params.max_depth {
            return id;
        }
        let Some(split) = self.find_split(&rows, features, g, h) else {
            return id;
        };
        let col = &self.bins[split.feature * self.n_rows..(split.feature + 1) * self.n_rows];
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = rows.into_iter().partition(|&r| {
            let b = col[r as usize];
            if b == MISSING_BIN {
                split.default_left
            } else {
                (b as usize) <= split.cut
            }
        });
        let left = self.grow(tree, cut_index, left_rows, features, depth + 1);
        let right = self.grow(tree, cut_index, right_rows, features, depth + 1);
        tree.nodes[id] = TreeNode::Split {
            split_feature: split.feature,
            split_threshold: self.mapper.cuts[split.feature][split.cut],
            default_direction: if split.default_left { Direction::Left } else { Direction::Right },
            split_gain: split.gain,
            left,
            right,
        };
        cut_index[id] = split.cut;
        id
    }
}
