//! World Port Index attribute schema and its numeric encoding.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// WPI harbor-size class, ordered from smallest to largest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HarborSize {
    VerySmall,
    Small,
    Medium,
    Large,
}

impl HarborSize {
    pub const ALL: [HarborSize; 4] = [
        HarborSize::VerySmall,
        HarborSize::Small,
        HarborSize::Medium,
        HarborSize::Large,
    ];

    pub fn ordinal(self) -> f64 {
        self as u8 as f64
    }

    pub fn label(self) -> &'static str {
        match self {
            HarborSize::VerySmall => "Very Small",
            HarborSize::Small => "Small",
            HarborSize::Medium => "Medium",
            HarborSize::Large => "Large",
        }
    }

    /// Parses a comma-separated list such as `Small,Medium,Large`.
    pub fn parse_set(s: &str) -> Result<Vec<HarborSize>> {
        let mut sizes = s
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<HarborSize>>>()?;
        sizes.sort();
        sizes.dedup();
        Ok(sizes)
    }
}

impl fmt::Display for HarborSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for HarborSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .trim()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "v" | "verysmall" => Ok(HarborSize::VerySmall),
            "s" | "small" => Ok(HarborSize::Small),
            "m" | "medium" => Ok(HarborSize::Medium),
            "l" | "large" => Ok(HarborSize::Large),
            _ => Err(Error::Schema(format!("unknown harbor size {s:?}"))),
        }
    }
}

/// A yes/no flag whose third state is "unknown".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ternary {
    Yes,
    No,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttrValue {
    Number(f64),
    Flag(Ternary),
    Missing,
}

impl AttrValue {
    /// Feature encoding: numbers pass through, yes=1, no=0, unknown and
    /// missing become NaN.
    pub fn encode(self) -> f64 {
        match self {
            AttrValue::Number(v) => v,
            AttrValue::Flag(Ternary::Yes) => 1.0,
            AttrValue::Flag(Ternary::No) => 0.0,
            AttrValue::Flag(Ternary::Unknown) | AttrValue::Missing => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum AttrKind {
    Numeric,
    Flag,
    /// Categorical codes with a fixed numeric mapping. Several labels may
    /// share a value (code letter and spelled-out name).
    Coded(&'static [(&'static str, f64)]),
}

const SIZE_CODES: &[(&str, f64)] = &[
    ("v", 0.0),
    ("very small", 0.0),
    ("s", 1.0),
    ("small", 1.0),
    ("m", 2.0),
    ("medium", 2.0),
    ("l", 3.0),
    ("large", 3.0),
];

const HARBOR_TYPE: &[(&str, f64)] = &[
    ("n", 0.0),
    ("none", 0.0),
    ("cn", 1.0),
    ("coastal natural", 1.0),
    ("cb", 2.0),
    ("coastal breakwater", 2.0),
    ("ct", 3.0),
    ("coastal tide gate", 3.0),
    ("rn", 4.0),
    ("river natural", 4.0),
    ("rb", 5.0),
    ("river basin", 5.0),
    ("rt", 6.0),
    ("river tide gate", 6.0),
    ("lc", 7.0),
    ("lake or canal", 7.0),
    ("or", 8.0),
    ("open roadstead", 8.0),
    ("th", 9.0),
    ("typhoon harbor", 9.0),
];

const HARBOR_USE: &[(&str, f64)] = &[
    ("fishing", 1.0),
    ("military", 2.0),
    ("cargo", 3.0),
    ("ferry", 4.0),
];

const SHELTER: &[(&str, f64)] = &[
    ("n", 0.0),
    ("none", 0.0),
    ("p", 1.0),
    ("poor", 1.0),
    ("f", 2.0),
    ("fair", 2.0),
    ("g", 3.0),
    ("good", 3.0),
    ("e", 4.0),
    ("excellent", 4.0),
];

const NAVAREA: &[(&str, f64)] = &[
    ("i", 1.0),
    ("ii", 2.0),
    ("iii", 3.0),
    ("iv", 4.0),
    ("v", 5.0),
    ("vi", 6.0),
    ("vii", 7.0),
    ("viii", 8.0),
    ("ix", 9.0),
    ("x", 10.0),
    ("xi", 11.0),
    ("xii", 12.0),
    ("xiii", 13.0),
    ("xiv", 14.0),
    ("xv", 15.0),
    ("xvi", 16.0),
    ("xvii", 17.0),
    ("xviii", 18.0),
    ("xix", 19.0),
    ("xx", 20.0),
    ("xxi", 21.0),
];

const REPAIRS: &[(&str, f64)] = &[
    ("n", 0.0),
    ("none", 0.0),
    ("d", 1.0),
    ("emergency only", 1.0),
    ("c", 2.0),
    ("limited", 2.0),
    ("b", 3.0),
    ("moderate", 3.0),
    ("a", 4.0),
    ("major", 4.0),
];

const DRY_DOCK: &[(&str, f64)] = &[
    ("n", 0.0),
    ("none", 0.0),
    ("s", 1.0),
    ("small", 1.0),
    ("m", 2.0),
    ("medium", 2.0),
    ("l", 3.0),
    ("large", 3.0),
];

use AttrKind::{Coded, Flag, Numeric};

/// The 91 WPI attributes used as port features, in output order.
pub const WPI_SCHEMA: [(&str, AttrKind); 91] = [
    ("tidal_range_m", Numeric),
    ("entrance_width_m", Numeric),
    ("channel_depth_m", Numeric),
    ("anchorage_depth_m", Numeric),
    ("cargo_pier_depth_m", Numeric),
    ("oil_terminal_depth_m", Numeric),
    ("lng_terminal_depth_m", Numeric),
    ("max_vessel_length_m", Numeric),
    ("max_vessel_beam_m", Numeric),
    ("max_vessel_draft_m", Numeric),
    ("offshore_max_length_m", Numeric),
    ("offshore_max_beam_m", Numeric),
    ("offshore_max_draft_m", Numeric),
    ("harbor_size", Coded(SIZE_CODES)),
    ("harbor_type", Coded(HARBOR_TYPE)),
    ("harbor_use", Coded(HARBOR_USE)),
    ("shelter_afforded", Coded(SHELTER)),
    ("entrance_restriction_tide", Flag),
    ("entrance_restriction_swell", Flag),
    ("entrance_restriction_ice", Flag),
    ("entrance_restriction_other", Flag),
    ("overhead_limits", Flag),
    ("underkeel_clearance", Flag),
    ("good_holding_ground", Flag),
    ("turning_area", Flag),
    ("traffic_separation_scheme", Flag),
    ("vessel_traffic_service", Flag),
    ("navarea", Coded(NAVAREA)),
    ("search_and_rescue", Flag),
    ("port_security", Flag),
    ("eta_message", Flag),
    ("quarantine_pratique", Flag),
    ("quarantine_sanitation", Flag),
    ("quarantine_other", Flag),
    ("first_port_entry", Flag),
    ("us_representative", Flag),
    ("pilotage_compulsory", Flag),
    ("pilotage_available", Flag),
    ("pilotage_local_assist", Flag),
    ("pilotage_advisable", Flag),
    ("tugs_salvage", Flag),
    ("tugs_assistance", Flag),
    ("comm_telephone", Flag),
    ("comm_telefax", Flag),
    ("comm_radio", Flag),
    ("comm_radio_tel", Flag),
    ("comm_airport", Flag),
    ("comm_rail", Flag),
    ("wharves", Flag),
    ("anchorage", Flag),
    ("dangerous_cargo_anchorage", Flag),
    ("med_mooring", Flag),
    ("beach_mooring", Flag),
    ("ice_mooring", Flag),
    ("roro", Flag),
    ("solid_bulk", Flag),
    ("liquid_bulk", Flag),
    ("container", Flag),
    ("breakbulk", Flag),
    ("oil_terminal", Flag),
    ("lng_terminal", Flag),
    ("other_facilities", Flag),
    ("medical_facilities", Flag),
    ("garbage_disposal", Flag),
    ("chemical_tank_disposal", Flag),
    ("dirty_ballast_disposal", Flag),
    ("degaussing", Flag),
    ("cranes_fixed", Flag),
    ("cranes_mobile", Flag),
    ("cranes_floating", Flag),
    ("cranes_container", Flag),
    ("lifts_100_plus_tons", Flag),
    ("lifts_50_100_tons", Flag),
    ("lifts_25_49_tons", Flag),
    ("lifts_0_24_tons", Flag),
    ("svc_longshoremen", Flag),
    ("svc_electricity", Flag),
    ("svc_steam", Flag),
    ("svc_nav_equip", Flag),
    ("svc_elec_repair", Flag),
    ("svc_ice_breaking", Flag),
    ("svc_diving", Flag),
    ("sup_provisions", Flag),
    ("sup_potable_water", Flag),
    ("sup_fuel_oil", Flag),
    ("sup_diesel_oil", Flag),
    ("sup_aviation_fuel", Flag),
    ("sup_deck", Flag),
    ("sup_engine", Flag),
    ("repairs", Coded(REPAIRS)),
    ("dry_dock", Coded(DRY_DOCK)),
];

pub fn schema_kind(name: &str) -> Option<AttrKind> {
    WPI_SCHEMA.iter().find(|(n, _)| *n == name).map(|(_, k)| *k)
}

pub fn wpi_feature_names() -> impl Iterator<Item = &'static str> {
    WPI_SCHEMA.iter().map(|(n, _)| *n)
}

fn is_unknown(cell: &str) -> bool {
    matches!(
        cell.to_ascii_lowercase().as_str(),
        "" | "u" | "unknown" | "na" | "n/a"
    )
}

/// Parses one raw WPI cell under the attribute's kind.
pub fn parse_attr(name: &str, cell: &str) -> Result<AttrValue> {
    let kind = schema_kind(name).ok_or_else(|| Error::Schema(format!("unknown WPI attribute {name:?}")))?;
    let cell = cell.trim();
    let bad = || Error::Schema(format!("attribute {name}: cannot parse {cell:?}"));
    match kind {
        Flag => Ok(match cell.to_ascii_lowercase().as_str() {
            "y" | "yes" | "true" | "1" => AttrValue::Flag(Ternary::Yes),
            "n" | "no" | "false" | "0" => AttrValue::Flag(Ternary::No),
            c if is_unknown(c) => AttrValue::Flag(Ternary::Unknown),
            _ => return Err(bad()),
        }),
        _ if is_unknown(cell) => Ok(AttrValue::Missing),
        Numeric => cell.parse::<f64>().map(AttrValue::Number).map_err(|_| bad()),
        Coded(codes) => {
            if let Ok(v) = cell.parse::<f64>() {
                return Ok(AttrValue::Number(v));
            }
            let lower = cell.to_ascii_lowercase();
            codes
                .iter()
                .find(|(label, _)| *label == lower)
                .map(|(_, v)| AttrValue::Number(*v))
                .ok_or_else(bad)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WpiRecord {
    pub port_id: String,
    pub harbor_size: HarborSize,
    pub region: String,
    pub attributes: BTreeMap<String, AttrValue>,
}

/// Encodes a WPI record into the fixed 91-wide feature vector.
///
/// Attributes absent from the record are missing (NaN). The port
/// identifier and region are never part of the output.
pub fn encode_wpi(record: &WpiRecord) -> Result<Vec<f64>> {
    if let Some(unknown) = record.attributes.keys().find(|k| schema_kind(k).is_none()) {
        return Err(Error::Schema(format!("unknown WPI attribute {unknown:?}")));
    }
    Ok(WPI_SCHEMA
        .iter()
        .map(|(name, _)| {
            if *name == "harbor_size" {
                record.harbor_size.ordinal()
            } else {
                record
                    .attributes
                    .get(*name)
                    .copied()
                    .unwrap_or(AttrValue::Missing)
                    .encode()
            }
        })
        .collect())
}

/// Reads `wpi.csv`: `port_id`, `region`, `harbor_size`, then any subset of
/// the schema attributes.
pub fn read_wpi_csv<R: Read>(reader: R) -> Result<Vec<WpiRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("wpi.csv lacks column {name}")))
    };
    let (id_col, region_col, size_col) = (col("port_id")?, col("region")?, col("harbor_size")?);
    for h in &header {
        if !matches!(h.as_str(), "port_id" | "region") && schema_kind(h).is_none() {
            return Err(Error::Schema(format!("unknown WPI attribute {h:?}")));
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let port_id = rec[id_col].trim().to_string();
        if !seen.insert(port_id.clone()) {
            return Err(Error::Schema(format!("duplicate port_id {port_id:?} in wpi.csv")));
        }
        let mut attributes = BTreeMap::new();
        for (i, name) in header.iter().enumerate() {
            if i == id_col || i == region_col || i == size_col {
                continue;
            }
            attributes.insert(name.clone(), parse_attr(name, &rec[i])?);
        }
        out.push(WpiRecord {
            port_id,
            harbor_size: rec[size_col].parse()?,
            region: rec[region_col].trim().to_string(),
            attributes,
        });
    }
    Ok(out)
}
