//! Mapping between grid cells and latitude/longitude.
//!
//! Uses a local tangent plane at the table origin: column axis and row axis
//! are the table's x and y, rotated clockwise by `rotation_deg` from
//! east/north. At rotation 0 columns run east and rows run north.

use libm::{cos, floor, sin};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spec::TableSpec;

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

const DEG: f64 = core::f64::consts::PI / 180.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellCoord {
    pub col: u32,
    pub row: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Error)]
pub enum GeoError {
    #[error("cell ({col}, {row}) is outside the grid")]
    IndexOutOfRange { col: u32, row: u32 },
    #[error("({lat}, {lon}) lies outside the table extent")]
    OutOfExtent { lat: f64, lon: f64 },
}

/// Table-frame (x, y) meters to (east, north) meters.
pub fn table_to_world(spec: &TableSpec, x: f64, y: f64) -> (f64, f64) {
    let (s, c) = (sin(spec.rotation_deg() * DEG), cos(spec.rotation_deg() * DEG));
    (x * c + y * s, -x * s + y * c)
}

/// (east, north) meters to table-frame (x, y) meters.
pub fn world_to_table(spec: &TableSpec, east: f64, north: f64) -> (f64, f64) {
    let (s, c) = (sin(spec.rotation_deg() * DEG), cos(spec.rotation_deg() * DEG));
    (east * c - north * s, east * s + north * c)
}

/// Center of cell `(col, row)`.
pub fn cell_to_geo(spec: &TableSpec, col: u32, row: u32) -> Result<LatLon, GeoError> {
    if col >= spec.ncols() || row >= spec.nrows() {
        return Err(GeoError::IndexOutOfRange { col, row });
    }
    let cs = spec.cell_size_m();
    let (east, north) = table_to_world(spec, (f64::from(col) + 0.5) * cs, (f64::from(row) + 0.5) * cs);
    let lat = spec.origin_lat() + north / EARTH_RADIUS_M / DEG;
    let lon = spec.origin_lon() + east / (EARTH_RADIUS_M * cos(spec.origin_lat() * DEG)) / DEG;
    Ok(LatLon { lat, lon })
}

/// The cell containing `(lat, lon)`.
pub fn geo_to_cell(spec: &TableSpec, lat: f64, lon: f64) -> Result<CellCoord, GeoError> {
    let out = GeoError::OutOfExtent { lat, lon };
    if !(lat.is_finite() && lon.is_finite()) {
        return Err(out);
    }
    let north = (lat - spec.origin_lat()) * DEG * EARTH_RADIUS_M;
    let east = (lon - spec.origin_lon()) * DEG * EARTH_RADIUS_M * cos(spec.origin_lat() * DEG);
    let (x, y) = world_to_table(spec, east, north);
    let col = floor(x / spec.cell_size_m());
    let row = floor(y / spec.cell_size_m());
    if !(0.0..f64::from(spec.ncols())).contains(&col) || !(0.0..f64::from(spec.nrows())).contains(&row) {
        return Err(out);
    }
    Ok(CellCoord {
        col: col as u32,
        row: row as u32,
    })
}
