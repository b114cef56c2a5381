//! Request and response bodies of the HTTP API.

use cityio_core::feedback::Anchor;
use cityio_core::history::Source;
use cityio_core::spec::{default_registry, CellType, TableSpecDraft, DEFAULT_FLOOR_HEIGHT_M};
use cityio_core::{CellEdit, Commit, GridState, TableSpec};
use serde::{Deserialize, Serialize};

/// `POST /api/tables`. Everything but the name and size is optional.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewTable {
    pub name: String,
    pub ncols: u32,
    pub nrows: u32,
    #[serde(default = "default_cell_size")]
    pub cell_size_m: f64,
    #[serde(default = "default_floor_height")]
    pub floor_height_m: f64,
    #[serde(default)]
    pub origin_lat: f64,
    #[serde(default)]
    pub origin_lon: f64,
    #[serde(default)]
    pub rotation_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registry: Option<Vec<CellType>>,
}

fn default_cell_size() -> f64 {
    10.0
}

fn default_floor_height() -> f64 {
    DEFAULT_FLOOR_HEIGHT_M
}

impl NewTable {
    pub fn new(name: &str, ncols: u32, nrows: u32) -> Self {
        NewTable::from(TableSpecDraft::new(name, ncols, nrows))
    }

    pub fn into_draft(self) -> TableSpecDraft {
        TableSpecDraft {
            name: self.name,
            ncols: self.ncols,
            nrows: self.nrows,
            cell_size_m: self.cell_size_m,
            floor_height_m: self.floor_height_m,
            origin_lat: self.origin_lat,
            origin_lon: self.origin_lon,
            rotation_deg: self.rotation_deg,
            registry: self.registry.unwrap_or_else(default_registry),
        }
    }
}

impl From<TableSpecDraft> for NewTable {
    fn from(d: TableSpecDraft) -> Self {
        NewTable {
            name: d.name,
            ncols: d.ncols,
            nrows: d.nrows,
            cell_size_m: d.cell_size_m,
            floor_height_m: d.floor_height_m,
            origin_lat: d.origin_lat,
            origin_lon: d.origin_lon,
            rotation_deg: d.rotation_deg,
            registry: Some(d.registry),
        }
    }
}

/// One entry of `GET /api/tables`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableSummary {
    pub name: String,
    pub head_version: u64,
    pub ncols: u32,
    pub nrows: u32,
    pub cell_size_m: f64,
}

/// `GET /api/tables/{name}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableInfo {
    pub spec: TableSpec,
    pub head_version: u64,
    pub max_seq: u64,
    pub layers: Vec<String>,
}

/// `POST /api/tables/{name}/grid`: exactly one of `grid` and `edits`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPost {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edits: Option<Vec<CellEdit>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_version: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Source>,
}

impl GridPost {
    pub fn frame(grid: GridState) -> Self {
        GridPost { grid: Some(grid), ..Default::default() }
    }

    pub fn edits(base_version: u64, edits: Vec<CellEdit>) -> Self {
        GridPost { edits: Some(edits), base_version: Some(base_version), ..Default::default() }
    }

    pub fn by(mut self, author: &str, source: Source) -> Self {
        self.author = Some(author.into());
        self.source = Some(source);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    /// Current head, on version conflicts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head: Option<Commit>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewComment {
    pub anchor: Anchor,
    pub text: String,
    pub author: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewReaction {
    pub author: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReactionAck {
    pub comment_id: u64,
    pub like_count: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerAck {
    pub name: String,
    pub produced_from_version: u64,
    pub seq: u64,
}

/// Data of the `snapshot` stream event sent to subscribers that give no
/// starting seq.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub seq: u64,
    pub head: Commit,
}

/// Data of the `heartbeat` stream event.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Heartbeat {
    pub seq: u64,
}

pub const WORKER_TOKEN_HEADER: &str = "x-worker-token";
pub const EXCLUDED_HEADER: &str = "x-excluded-comments";
