//! Straightforward per-pixel loop versions of the raster features, written
//! independently of the library for cross-checking.

use seatrade::raster::AoiMonthStack;

fn db(v: f64) -> f64 {
    10.0 * (v + 1e-8).log10()
}

fn sorted_median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

/// `grid[date][row][col]`, `None` for masked pixels.
fn cube(stack: &AoiMonthStack) -> Vec<Vec<Vec<Option<f64>>>> {
    stack
        .grids()
        .iter()
        .map(|g| {
            (0..g.height())
                .map(|r| (0..g.width()).map(|c| g.get(r * g.width() + c)).collect())
                .collect()
        })
        .collect()
}

fn composite(stack: &AoiMonthStack) -> Vec<Vec<Option<f64>>> {
    let c = cube(stack);
    let (h, w) = (c[0].len(), c[0][0].len());
    let mut out = vec![vec![None; w]; h];
    for r in 0..h {
        for col in 0..w {
            let series: Vec<f64> = c.iter().filter_map(|g| g[r][col]).collect();
            out[r][col] = sorted_median(series);
        }
    }
    out
}

pub fn vv_diff_median(stack: &AoiMonthStack) -> Option<f64> {
    let c = cube(stack);
    if c.len() < 2 {
        return None;
    }
    let mut sums = Vec::new();
    for t in 1..c.len() {
        let mut sum = 0.0;
        let mut any = false;
        for r in 0..c[t].len() {
            for col in 0..c[t][r].len() {
                if let (Some(a), Some(b)) = (c[t - 1][r][col], c[t][r][col]) {
                    sum += (db(b) - db(a)).abs();
                    any = true;
                }
            }
        }
        if any {
            sums.push(sum);
        }
    }
    sorted_median(sums)
}

pub fn vh_backscatter(stack: &AoiMonthStack) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for row in composite(stack) {
        for v in row.into_iter().flatten() {
            sum += db(v);
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// (mean, max, spatial std, temporal std)
pub fn ntl_stats(stack: &AoiMonthStack) -> Option<(f64, f64, f64, f64)> {
    let pixels: Vec<f64> = composite(stack)
        .into_iter()
        .flatten()
        .flatten()
        .map(|v| if v < 0.0 { 0.0 } else { v })
        .collect();
    if pixels.is_empty() {
        return None;
    }
    let (mean, spatial_std) = mean_std(&pixels);
    let max = pixels.iter().cloned().fold(f64::MIN, f64::max);
    let mut daily = Vec::new();
    for g in cube(stack) {
        let vals: Vec<f64> = g.into_iter().flatten().flatten().map(|v| v.max(0.0)).collect();
        if !vals.is_empty() {
            daily.push(vals.iter().sum::<f64>() / vals.len() as f64);
        }
    }
    let (_, temporal_std) = mean_std(&daily);
    Some((mean, max, spatial_std, temporal_std))
}

pub fn lit_area_ratio(stack: &AoiMonthStack, tau: f64) -> Option<f64> {
    let (mut lit, mut n) = (0usize, 0usize);
    for row in composite(stack) {
        for v in row.into_iter().flatten() {
            n += 1;
            if v > tau {
                lit += 1;
            }
        }
    }
    (n > 0).then(|| lit as f64 / n as f64)
}

fn close(what: &str, lib: Option<f64>, naive: Option<f64>, tol: f64) -> Result<f64, String> {
    match (lib, naive) {
        (None, None) => Ok(0.0),
        (Some(a), Some(b)) if (a - b).abs() < tol => Ok((a - b).abs()),
        _ => Err(format!("{what}: library {lib:?} vs loop {naive:?}")),
    }
}

/// Compares every library feature against the loop versions on one stack.
/// Returns the largest absolute gap.
pub fn check_stack(stack: &AoiMonthStack, tau: f64, tol: f64) -> Result<f64, String> {
    use seatrade::raster::{self as r, NtlStdMode};
    let mut gap: f64 = 0.0;
    let vv = r::vv_diff_median(stack).map_err(|e| e.to_string())?;
    gap = gap.max(close("vv_diff_median", vv, vv_diff_median(stack), tol)?);
    gap = gap.max(close("vh_backscatter", r::vh_backscatter(stack).ok(), vh_backscatter(stack), tol)?);
    let naive = ntl_stats(stack);
    let spatial = r::ntl_stats(stack, NtlStdMode::Spatial).ok();
    let temporal = r::ntl_stats(stack, NtlStdMode::Temporal).ok();
    gap = gap.max(close("ntl_mean", spatial.map(|s| s.mean), naive.map(|n| n.0), tol)?);
    gap = gap.max(close("ntl_max", spatial.map(|s| s.max), naive.map(|n| n.1), tol)?);
    gap = gap.max(close("ntl_std spatial", spatial.map(|s| s.std), naive.map(|n| n.2), tol)?);
    gap = gap.max(close("ntl_std temporal", temporal.map(|s| s.std), naive.map(|n| n.3), tol)?);
    gap = gap.max(close("lit_area_ratio", r::lit_area_ratio(stack, tau).ok(), lit_area_ratio(stack, tau), tol)?);
    Ok(gap)
}
