//! Port trade nowcasting from satellite imagery.
//!
//! The crate turns per-port SAR and nighttime-light raster stacks into
//! monthly features ([`raster`]), joins them with port attributes and trade
//! targets ([`panel`]), fits gradient-boosted trees ([`gbt`]), scores them
//! ([`eval`]), and checks how predictions transfer to unseen regions
//! ([`extrap`], [`mc`]). The `seatrade` binary wraps all of it ([`cli`]).

pub mod cli;
pub mod error;
pub mod eval;
pub mod extrap;
pub mod gbt;
pub mod mc;
pub mod month;
pub mod panel;
pub mod raster;

pub use error::{Error, Result};
pub use month::YearMonth;
