//! Synthetic three-port, 24-month corpus in the on-disk layouts the
//! pipeline reads: `rasters/<port>/<band>/<date>.rgrd`, `wpi.csv`, `trade.csv`.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::Rng;
use seatrade::panel::{wpi_feature_names, AttrKind, WPI_SCHEMA};
use seatrade::raster::{write_rgrid, RasterGrid};
use seatrade::YearMonth;

pub const PORTS: [(&str, &str, &str); 3] = [("P001", "north", "L"), ("P002", "north", "M"), ("P003", "south", "S")];
pub const FIRST_MONTH: &str = "2021-01";
pub const N_MONTHS: usize = 24;
const SIDE: usize = 6;

pub struct Fixture {
    pub root: PathBuf,
    pub rasters: PathBuf,
    pub wpi: PathBuf,
    pub trade: PathBuf,
}

fn activity(port: usize, t: usize) -> f64 {
    let season = (t as f64 * std::f64::consts::PI / 6.0).sin();
    1.0 + port as f64 * 0.6 + 0.3 * season + 0.02 * t as f64
}

fn sar_grid(rng: &mut impl Rng, level: f64, date: NaiveDate) -> RasterGrid {
    let ships = (level * 4.0).round() as usize;
    let mut values: Vec<f64> = (0..SIDE * SIDE).map(|_| rng.random_range(0.01..0.05)).collect();
    for _ in 0..ships {
        let i = rng.random_range(0..values.len());
        values[i] = rng.random_range(0.5..2.0);
    }
    // One corner pixel is outside the AOI polygon.
    values[0] = f64::NAN;
    RasterGrid::new(SIDE, SIDE, values, date).unwrap()
}

fn ntl_grid(rng: &mut impl Rng, level: f64, date: NaiveDate) -> RasterGrid {
    let values = (0..SIDE * SIDE)
        .map(|i| {
            let lit = (i % SIDE) < 3;
            let base = if lit { 4.0 * level } else { 0.2 };
            base + rng.random_range(-0.3..0.3)
        })
        .collect();
    RasterGrid::new(SIDE, SIDE, values, date).unwrap()
}

fn wpi_cell(port: usize, name: &str, kind: AttrKind) -> String {
    match (name, kind) {
        ("harbor_size", _) => PORTS[port].2.to_string(),
        (_, AttrKind::Flag) => ["Y", "N", "U"][(port + name.len()) % 3].to_string(),
        (_, AttrKind::Numeric) => format!("{}", (name.len() * (port + 1)) % 17),
        (_, AttrKind::Coded(codes)) => codes[port % codes.len()].0.to_uppercase(),
    }
}

pub fn months() -> Vec<YearMonth> {
    let first: YearMonth = FIRST_MONTH.parse().unwrap();
    (0..N_MONTHS).map(|i| first.offset(i as i64)).collect()
}

/// Writes the corpus under `root`.
pub fn write(root: &Path) -> Fixture {
    let mut rng = super::rng(7);
    let rasters = root.join("rasters");
    for (p, (port, _, _)) in PORTS.iter().enumerate() {
        for (t, m) in months().into_iter().enumerate() {
            let level = activity(p, t);
            for (band, days) in [("vv", &[3u32, 15, 27][..]), ("vh", &[9, 21][..]), ("ntl", &[12][..])] {
                let dir = rasters.join(port).join(band);
                fs::create_dir_all(&dir).unwrap();
                for &d in days {
                    let date = NaiveDate::from_ymd_opt(m.year(), m.month(), d).unwrap();
                    let grid = if band == "ntl" {
                        ntl_grid(&mut rng, level, date)
                    } else {
                        sar_grid(&mut rng, level, date)
                    };
                    write_rgrid(&dir.join(format!("{date}.rgrd")), &grid).unwrap();
                }
            }
        }
    }

    let mut wpi = String::from("port_id,region");
    for name in wpi_feature_names() {
        wpi.push(',');
        wpi.push_str(name);
    }
    wpi.push('\n');
    for (p, (port, region, _)) in PORTS.iter().enumerate() {
        wpi.push_str(&format!("{port},{region}"));
        for (name, kind) in WPI_SCHEMA.iter() {
            wpi.push(',');
            wpi.push_str(&wpi_cell(p, name, *kind));
        }
        wpi.push('\n');
    }
    let wpi_path = root.join("wpi.csv");
    fs::write(&wpi_path, wpi).unwrap();

    let mut trade = String::from("port_id,year_month,trade_value,trade_weight\n");
    for (p, (port, _, _)) in PORTS.iter().enumerate() {
        for (t, m) in months().into_iter().enumerate() {
            let level = activity(p, t);
            let value = (12.0 + level + rng.random_range(-0.05..0.05)).exp();
            let weight = (9.0 + 0.8 * level + rng.random_range(-0.05..0.05)).exp();
            trade.push_str(&format!("{port},{m},{value:.2},{weight:.2}\n"));
        }
    }
    let trade_path = root.join("trade.csv");
    fs::write(&trade_path, trade).unwrap();

    Fixture {
        root: root.to_path_buf(),
        rasters,
        wpi: wpi_path,
        trade: trade_path,
    }
}
