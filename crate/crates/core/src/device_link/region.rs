//! Coarse country polygons used by the mock apps and the cell-tower table.
//!
//! The bundled table (`assets/regions.json`) holds hand-traced outlines for
//! the contiguous US, Canada and Italy. It is accurate to tens of kilometres
//! near borders, which is all the mock apps need.

use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::geo::GeoPoint;

pub const UNKNOWN_REGION: &str = "unknown";

const BUNDLED: &str = include_str!("../../assets/regions.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: String,
    pub name: String,
    pub currency: String,
    /// Outer rings of `[lat, lon]` vertices; the ring closes implicitly.
    pub polygons: Vec<Vec<[f64; 2]>>,
}

impl Region {
    pub fn contains(&self, p: GeoPoint) -> bool {
        self.polygons.iter().any(|ring| point_in_ring(p, ring))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionTable {
    pub regions: Vec<Region>,
}

#[derive(Debug, thiserror::Error)]
pub enum RegionTableError {
    #[error("reading region table: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing region table: {0}")]
    Json(#[from] serde_json::Error),
    #[error("region {0} has a ring with fewer than 3 vertices")]
    Degenerate(String),
}

impl RegionTable {
    pub fn bundled() -> &'static RegionTable {
        static TABLE: OnceLock<RegionTable> = OnceLock::new();
        TABLE.get_or_init(|| RegionTable::from_json(BUNDLED).expect("bundled region table is valid"))
    }

    pub fn from_json(text: &str) -> Result<Self, RegionTableError> {
        let table: RegionTable = serde_json::from_str(text)?;
        for r in &table.regions {
            if r.polygons.iter().any(|ring| ring.len() < 3) {
                return Err(RegionTableError::Degenerate(r.id.clone()));
            }
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, RegionTableError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// First region containing the point, in table order.
    pub fn lookup(&self, lat: f64, lon: f64) -> &str {
        let p = GeoPoint::new(lat, lon);
        if !p.is_valid() {
            return UNKNOWN_REGION;
        }
        self.regions
            .iter()
            .find(|r| r.contains(p))
            .map(|r| r.id.as_str())
            .unwrap_or(UNKNOWN_REGION)
    }

    pub fn get(&self, id: &str) -> Option<&Region> {
        self.regions.iter().find(|r| r.id == id)
    }

    pub fn display_name<'a>(&'a self, id: &'a str) -> &'a str {
        self.get(id).map(|r| r.name.as_str()).unwrap_or(id)
    }
}

/// Region id for a coordinate using the bundled table; `"unknown"` when no
/// polygon contains it.
pub fn region_lookup(lat: f64, lon: f64) -> String {
    RegionTable::bundled().lookup(lat, lon).to_string()
}

/// Even-odd ray casting in the (lon, lat) plane.
fn point_in_ring(p: GeoPoint, ring: &[[f64; 2]]) -> bool {
    let (x, y) = (p.lon, p.lat);
    let mut inside = false;
    let mut j = ring.len() - 1;
    for i in 0..ring.len() {
        let (yi, xi) = (ring[i][0], ring[i][1]);
        let (yj, xj) = (ring[j][0], ring[j][1]);
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}
