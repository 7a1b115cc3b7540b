#![allow(dead_code)]

pub mod fixture;
pub mod oracle;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seatrade::raster::{AoiMonthStack, RasterGrid};
use seatrade::YearMonth;

/// Random stack with masks: up to `max_side`×`max_side` pixels, 1..=`max_len` dates.
pub fn random_stack(rng: &mut ChaCha8Rng, max_side: usize, max_len: usize, lo: f64, hi: f64) -> AoiMonthStack {
    let w = rng.random_range(1..=max_side);
    let h = rng.random_range(1..=max_side);
    let n = rng.random_range(1..=max_len);
    let mask_rate = rng.random_range(0.0..0.5);
    let grids = (0..n)
        .map(|d| {
            let values: Vec<f64> = (0..w * h).map(|_| rng.random_range(lo..hi)).collect();
            let mask: Vec<bool> = (0..w * h).map(|_| rng.random_bool(mask_rate)).collect();
            let date = NaiveDate::from_ymd_opt(2021, 5, 1 + d as u32).unwrap();
            RasterGrid::with_mask(w, h, values, mask, date).unwrap()
        })
        .collect();
    AoiMonthStack::new("aoi", YearMonth::new(2021, 5).unwrap(), grids).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
