use super::Matrix;

pub(crate) const MISSING_BIN: u16 = u16::MAX;

/// Per-feature split candidates. A value `x` falls in bin `b` when
/// `x <= cuts[b]`, or in the last bin when above every cut.
#[derive(Debug, Clone)]
pub(crate) struct BinMapper {
    pub cuts: Vec<Vec<f64>>,
}

impl BinMapper {
    /// Quantile cut points from the training data. With at most `n_bins`
    /// distinct values every distinct value except the largest is a cut.
    pub fn fit(x: &Matrix<'_>, n_bins: usize) -> BinMapper {
        let cuts = (0..x.n_cols())
            .map(|f| {
                let mut vals: Vec<f64> = (0..x.n_rows()).map(|r| x.get(r, f)).filter(|v| !v.is_nan()).collect();
                vals.sort_unstable_by(f64::total_cmp);
                feature_cuts(&vals, n_bins)
            })
            .collect();
        BinMapper { cuts }
    }

    pub fn bin(&self, feature: usize, value: f64) -> u16 {
        if value.is_nan() {
            return MISSING_BIN;
        }
        self.cuts[feature].partition_point(|c| *c < value) as u16
    }

    pub fn n_bins(&self, feature: usize) -> usize {
        self.cuts[feature].len() + 1
    }

    /// Feature-major bin codes: `out[f * n_rows + r]`.
    pub fn transform(&self, x: &Matrix<'_>) -> Vec<u16> {
        let n = x.n_rows();
        let mut out = vec![0u16; n * x.n_cols()];
        for f in 0..x.n_cols() {
            for r in 0..n {
                out[f * n + r] = self.bin(f, x.get(r, f));
            }
        }
        out
    }
}

fn feature_cuts(sorted: &[f64], n_bins: usize) -> Vec<f64> {
    let mut distinct = sorted.to_vec();
    distinct.dedup();
    if distinct.len() <= 1 {
        return Vec::new();
    }
    let max = *distinct.last().unwrap();
    if distinct.len() <= n_bins {
        distinct.pop();
        return distinct;
    }
    let n = sorted.len();
    let mut cuts: Vec<f64> = (1..n_bins).map(|q| sorted[(q * n) / n_bins]).filter(|c| *c < max).collect();
    cuts.dedup();
    cuts
}
