//! Table descriptions: grid dimensions, geo anchor and the cell-type palette.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_SIDE: u32 = 256;
pub const MAX_CELLS: usize = 65_536;
pub const MAX_NAME_LEN: usize = 64;
pub const DEFAULT_FLOOR_HEIGHT_M: f64 = 3.0;

/// Land-use class of a cell type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Empty,
    Building,
    Road,
    Park,
    Water,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Empty,
        Category::Building,
        Category::Road,
        Category::Park,
        Category::Water,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Empty => "empty",
            Category::Building => "building",
            Category::Road => "road",
            Category::Park => "park",
            Category::Water => "water",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One entry of a table's palette of placeable pieces.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellType {
    pub id: u16,
    pub name: String,
    pub color: [u8; 3],
    pub category: Category,
    pub default_floors: u32,
}

impl CellType {
    pub fn new(id: u16, name: &str, color: [u8; 3], category: Category, default_floors: u32) -> Self {
        CellType {
            id,
            name: name.into(),
            color,
            category,
            default_floors,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum SpecError {
    #[error("table name {0:?} must match [a-z0-9_-]{{1,64}}")]
    InvalidName(String),
    #[error("grid dimensions {ncols}x{nrows} must be within 1..=256 per side")]
    InvalidDimensions { ncols: u32, nrows: u32 },
    #[error("cell_size_m must be positive and finite, got {0}")]
    InvalidCellSize(f64),
    #[error("floor_height_m must be positive and finite, got {0}")]
    InvalidFloorHeight(f64),
    #[error("origin ({lat}, {lon}) outside [-90, 90] x [-180, 180]")]
    InvalidOrigin { lat: f64, lon: f64 },
    #[error("rotation_deg must be in [0, 360), got {0}")]
    InvalidRotation(f64),
    #[error("registry ids must be unique and contiguous from 0")]
    RegistryIds,
    #[error("cell type 0 must be the empty type with default_floors 0")]
    ReservedEmpty,
    #[error("cell type {0} has a non-building category but default_floors > 0")]
    FloorsOnNonBuilding(u16),
    #[error("cell type {0} needs a name of 1..=64 characters")]
    InvalidTypeName(u16),
}

/// Unvalidated table description, as it arrives over the wire.
///
/// [`TableSpecDraft::validate`] turns it into an immutable [`TableSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpecDraft {
    pub name: String,
    pub ncols: u32,
    pub nrows: u32,
    pub cell_size_m: f64,
    #[serde(default = "default_floor_height")]
    pub floor_height_m: f64,
    pub origin_lat: f64,
    pub origin_lon: f64,
    pub rotation_deg: f64,
    pub registry: Vec<CellType>,
}

fn default_floor_height() -> f64 {
    DEFAULT_FLOOR_HEIGHT_M
}

impl TableSpecDraft {
    /// A draft with the default palette, 10 m cells and an origin at (0, 0).
    pub fn new(name: &str, ncols: u32, nrows: u32) -> Self {
        TableSpecDraft {
            name: name.into(),
            ncols,
            nrows,
            cell_size_m: 10.0,
            floor_height_m: DEFAULT_FLOOR_HEIGHT_M,
            origin_lat: 0.0,
            origin_lon: 0.0,
            rotation_deg: 0.0,
            registry: default_registry(),
        }
    }

    pub fn validate(self) -> Result<TableSpec, SpecError> {
        TableSpec::try_from(self)
    }
}

/// The palette used when a table does not bring its own.
pub fn default_registry() -> Vec<CellType> {
    vec![
        CellType::new(0, "empty", [0, 0, 0], Category::Empty, 0),
        CellType::new(1, "residential", [230, 180, 60], Category::Building, 4),
        CellType::new(2, "office", [70, 130, 220], Category::Building, 8),
        CellType::new(3, "road", [90, 90, 90], Category::Road, 0),
        CellType::new(4, "park", [60, 170, 80], Category::Park, 0),
        CellType::new(5, "water", [50, 120, 200], Category::Water, 0),
    ]
}

pub fn is_valid_table_name(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= MAX_NAME_LEN
        && name
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_' || b == b'-')
}

/// Immutable description of a table. Registry is sorted by id, so
/// `registry()[id]` is the type with that id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableSpecDraft", into = "TableSpecDraft")]
pub struct TableSpec {
    name: String,
    ncols: u32,
    nrows: u32,
    cell_size_m: f64,
    floor_height_m: f64,
    origin_lat: f64,
    origin_lon: f64,
    rotation_deg: f64,
    registry: Vec<CellType>,
}

impl TryFrom<TableSpecDraft> for TableSpec {
    type Error = SpecError;

    fn try_from(d: TableSpecDraft) -> Result<Self, SpecError> {
        if !is_valid_table_name(&d.name) {
            return Err(SpecError::InvalidName(d.name));
        }
        if d.ncols == 0 || d.nrows == 0 || d.ncols > MAX_SIDE || d.nrows > MAX_SIDE {
            return Err(SpecError::InvalidDimensions {
                ncols: d.ncols,
                nrows: d.nrows,
            });
        }
        if !(d.cell_size_m.is_finite() && d.cell_size_m > 0.0) {
            return Err(SpecError::InvalidCellSize(d.cell_size_m));
        }
        if !(d.floor_height_m.is_finite() && d.floor_height_m > 0.0) {
            return Err(SpecError::InvalidFloorHeight(d.floor_height_m));
        }
        if !((-90.0..=90.0).contains(&d.origin_lat) && (-180.0..=180.0).contains(&d.origin_lon)) {
            return Err(SpecError::InvalidOrigin {
                lat: d.origin_lat,
                lon: d.origin_lon,
            });
        }
        if !(0.0..360.0).contains(&d.rotation_deg) {
            return Err(SpecError::InvalidRotation(d.rotation_deg));
        }
        let registry = validate_registry(d.registry)?;
        Ok(TableSpec {
            name: d.name,
            ncols: d.ncols,
            nrows: d.nrows,
            cell_size_m: d.cell_size_m,
            floor_height_m: d.floor_height_m,
            origin_lat: d.origin_lat,
            origin_lon: d.origin_lon,
            rotation_deg: d.rotation_deg,
            registry,
        })
    }
}

impl From<TableSpec> for TableSpecDraft {
    fn from(s: TableSpec) -> Self {
        TableSpecDraft {
            name: s.name,
            ncols: s.ncols,
            nrows: s.nrows,
            cell_size_m: s.cell_size_m,
            floor_height_m: s.floor_height_m,
            origin_lat: s.origin_lat,
            origin_lon: s.origin_lon,
            rotation_deg: s.rotation_deg,
            registry: s.registry,
        }
    }
}

fn validate_registry(mut registry: Vec<CellType>) -> Result<Vec<CellType>, SpecError> {
    registry.sort_by_key(|t| t.id);
    if registry.is_empty() || registry.len() > usize::from(u16::MAX) + 1 {
        return Err(SpecError::RegistryIds);
    }
    for (i, t) in registry.iter().enumerate() {
        if usize::from(t.id) != i {
            return Err(SpecError::RegistryIds);
        }
        if t.name.is_empty() || t.name.chars().count() > MAX_NAME_LEN {
            return Err(SpecError::InvalidTypeName(t.id));
        }
        if t.category != Category::Building && t.default_floors != 0 {
            return Err(SpecError::FloorsOnNonBuilding(t.id));
        }
    }
    if registry[0].category != Category::Empty {
        return Err(SpecError::ReservedEmpty);
    }
    Ok(registry)
}

impl TableSpec {
    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn ncols(&self) -> u32 {
        self.ncols
    }
    pub fn nrows(&self) -> u32 {
        self.nrows
    }
    pub fn cell_count(&self) -> usize {
        self.ncols as usize * self.nrows as usize
    }
    pub fn cell_size_m(&self) -> f64 {
        self.cell_size_m
    }
    pub fn floor_height_m(&self) -> f64 {
        self.floor_height_m
    }
    pub fn origin_lat(&self) -> f64 {
        self.origin_lat
    }
    pub fn origin_lon(&self) -> f64 {
        self.origin_lon
    }
    pub fn rotation_deg(&self) -> f64 {
        self.rotation_deg
    }
    pub fn registry(&self) -> &[CellType] {
        &self.registry
    }

    pub fn cell_type(&self, id: u16) -> Option<&CellType> {
        self.registry.get(usize::from(id))
    }

    /// Row-major index of `(col, row)`, if in bounds.
    pub fn index(&self, col: u32, row: u32) -> Option<usize> {
        (col < self.ncols && row < self.nrows).then(|| row as usize * self.ncols as usize + col as usize)
    }

    pub fn col_row(&self, index: usize) -> (u32, u32) {
        let n = self.ncols as usize;
        ((index % n) as u32, (index / n) as u32)
    }

    /// First type of the given category, if the palette has one.
    pub fn first_of(&self, category: Category) -> Option<&CellType> {
        self.registry.iter().find(|t| t.category == category)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn draft() -> TableSpecDraft {
        TableSpecDraft::new("andorra_1", 16, 16)
    }

    #[test]
    fn default_draft_validates() {
        let spec = draft().validate().unwrap();
        assert_eq!(spec.cell_count(), 256);
        assert_eq!(spec.cell_type(0).unwrap().category, Category::Empty);
    }

    #[test]
    fn rejects_bad_names() {
        for name in ["", "Upper", "has space", "é", &"a".repeat(65)] {
            let mut d = draft();
            d.name = name.into();
            assert!(matches!(d.validate(), Err(SpecError::InvalidName(_))), "{name:?}");
        }
        let mut d = draft();
        d.name = "a".repeat(64);
        assert!(d.validate().is_ok());
    }

    #[test]
    fn rejects_bad_dimensions() {
        for (c, r) in [(0, 4), (4, 0), (257, 1), (1, 257)] {
            let mut d = draft();
            d.ncols = c;
            d.nrows = r;
            assert!(matches!(d.validate(), Err(SpecError::InvalidDimensions { .. })));
        }
        let mut d = draft();
        d.ncols = 256;
        d.nrows = 256;
        assert_eq!(d.validate().unwrap().cell_count(), MAX_CELLS);
    }

    #[test]
    fn rejects_bad_geometry() {
        let mut d = draft();
        d.cell_size_m = 0.0;
        assert!(matches!(d.validate(), Err(SpecError::InvalidCellSize(_))));
        let mut d = draft();
        d.floor_height_m = f64::NAN;
        assert!(matches!(d.validate(), Err(SpecError::InvalidFloorHeight(_))));
        let mut d = draft();
        d.origin_lat = 90.5;
        assert!(matches!(d.validate(), Err(SpecError::InvalidOrigin { .. })));
        let mut d = draft();
        d.rotation_deg = 360.0;
        assert!(matches!(d.validate(), Err(SpecError::InvalidRotation(_))));
    }

    #[test]
    fn registry_rules() {
        let mut d = draft();
        d.registry.swap(1, 3);
        let spec = d.validate().unwrap();
        assert!(spec.registry().iter().enumerate().all(|(i, t)| usize::from(t.id) == i));

        let mut d = draft();
        d.registry.remove(2);
        assert_eq!(d.validate(), Err(SpecError::RegistryIds));

        let mut d = draft();
        d.registry[0].category = Category::Park;
        assert_eq!(d.validate(), Err(SpecError::ReservedEmpty));

        let mut d = draft();
        d.registry[4].default_floors = 2;
        assert_eq!(d.validate(), Err(SpecError::FloorsOnNonBuilding(4)));

        let mut d = draft();
        d.registry.clear();
        assert_eq!(d.validate(), Err(SpecError::RegistryIds));
    }

    #[test]
    fn serde_round_trip_validates() {
        let spec = draft().validate().unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.starts_with("{\"name\":\"andorra_1\",\"ncols\":16,\"nrows\":16,\"cell_size_m\":10.0,"));
        let back: TableSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        let bad = json.replace("\"ncols\":16", "\"ncols\":0");
        assert!(serde_json::from_str::<TableSpec>(&bad).is_err());
    }

    #[test]
    fn index_mapping() {
        let spec = TableSpecDraft::new("t", 3, 2).validate().unwrap();
        assert_eq!(spec.index(2, 1), Some(5));
        assert_eq!(spec.index(3, 0), None);
        assert_eq!(spec.col_row(5), (2, 1));
    }
}
