//! Grid states, cell edits and diffs.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spec::{Category, TableSpec};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("cell index {index} out of range for {len} cells")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("cell {index}: unknown type id {type_id}")]
    UnknownTypeId { index: usize, type_id: u16 },
    #[error("rotation must be 0, 90, 180 or 270 degrees, got {0}")]
    InvalidRotation(u16),
    #[error("cell {index}: floors override on non-building type {type_id}")]
    IllegalFloorsOverride { index: usize, type_id: u16 },
    #[error("grid has {actual} cells, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },
}

/// Physical orientation of a tangible piece. Stored, not interpreted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub enum Rotation {
    #[default]
    R0,
    R90,
    R180,
    R270,
}

impl Rotation {
    pub fn degrees(self) -> u16 {
        match self {
            Rotation::R0 => 0,
            Rotation::R90 => 90,
            Rotation::R180 => 180,
            Rotation::R270 => 270,
        }
    }
}

impl TryFrom<u16> for Rotation {
    type Error = GridError;

    fn try_from(deg: u16) -> Result<Self, GridError> {
        match deg {
            0 => Ok(Rotation::R0),
            90 => Ok(Rotation::R90),
            180 => Ok(Rotation::R180),
            270 => Ok(Rotation::R270),
            other => Err(GridError::InvalidRotation(other)),
        }
    }
}

impl From<Rotation> for u16 {
    fn from(r: Rotation) -> u16 {
        r.degrees()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cell {
    pub type_id: u16,
    pub rotation: Rotation,
    /// Overrides the type's `default_floors`; buildings only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floors: Option<u32>,
}

impl Cell {
    pub const EMPTY: Cell = Cell {
        type_id: 0,
        rotation: Rotation::R0,
        floors: None,
    };

    pub fn of_type(type_id: u16) -> Self {
        Cell {
            type_id,
            ..Cell::EMPTY
        }
    }

    pub fn with_floors(mut self, floors: u32) -> Self {
        self.floors = Some(floors);
        self
    }

    pub fn with_rotation(mut self, rotation: Rotation) -> Self {
        self.rotation = rotation;
        self
    }

    /// Checks the cell against the palette; `index` is only used for error reporting.
    pub fn validate(&self, spec: &TableSpec, index: usize) -> Result<(), GridError> {
        let ty = spec.cell_type(self.type_id).ok_or(GridError::UnknownTypeId {
            index,
            type_id: self.type_id,
        })?;
        if self.floors.is_some() && ty.category != Category::Building {
            return Err(GridError::IllegalFloorsOverride {
                index,
                type_id: self.type_id,
            });
        }
        Ok(())
    }

    /// Category of the cell's type. Panics if the cell was not validated against `spec`.
    pub fn category(&self, spec: &TableSpec) -> Category {
        spec.registry()[usize::from(self.type_id)].category
    }

    /// Floors after applying the override; zero for anything that is not a building.
    pub fn floors_effective(&self, spec: &TableSpec) -> u32 {
        let ty = &spec.registry()[usize::from(self.type_id)];
        match ty.category {
            Category::Building => self.floors.unwrap_or(ty.default_floors),
            _ => 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellEdit {
    pub index: u32,
    pub cell: Cell,
}

impl CellEdit {
    pub fn new(index: u32, cell: Cell) -> Self {
        CellEdit { index, cell }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellDiff {
    pub index: u32,
    pub before: Cell,
    pub after: Cell,
}

impl CellDiff {
    pub fn edit(&self) -> CellEdit {
        CellEdit::new(self.index, self.after)
    }
}

/// Dense row-major cells of one table.
///
/// Deserialized grids are only structurally valid; call
/// [`GridState::validate`] before trusting them against a spec.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridState {
    cells: Vec<Cell>,
}

/// All-empty grid for `spec`.
pub fn new_grid(spec: &TableSpec) -> GridState {
    GridState {
        cells: vec![Cell::EMPTY; spec.cell_count()],
    }
}

impl GridState {
    pub fn from_cells(spec: &TableSpec, cells: Vec<Cell>) -> Result<Self, GridError> {
        let state = GridState { cells };
        state.validate(spec)?;
        Ok(state)
    }

    pub fn validate(&self, spec: &TableSpec) -> Result<(), GridError> {
        if self.cells.len() != spec.cell_count() {
            return Err(GridError::LengthMismatch {
                expected: spec.cell_count(),
                actual: self.cells.len(),
            });
        }
        self.cells
            .iter()
            .enumerate()
            .try_for_each(|(i, c)| c.validate(spec, i))
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Cell> {
        self.cells.get(index)
    }

    /// Applies `edits` in order, later edits to the same index winning.
    /// Every edit is checked before any is applied; `self` is untouched.
    pub fn apply_edits(&self, spec: &TableSpec, edits: &[CellEdit]) -> Result<GridState, GridError> {
        let len = self.cells.len();
        for e in edits {
            let index = e.index as usize;
            if index >= len {
                return Err(GridError::IndexOutOfRange { index, len });
            }
            e.cell.validate(spec, index)?;
        }
        let mut cells = self.cells.clone();
        for e in edits {
            cells[e.index as usize] = e.cell;
        }
        Ok(GridState { cells })
    }

    /// Applies the `after` side of a diff, only checking bounds. Used by
    /// replicas that trust the server's validation.
    pub fn apply_diff(&self, diff: &[CellDiff]) -> Result<GridState, GridError> {
        let mut cells = self.cells.clone();
        let len = cells.len();
        for d in diff {
            let slot = cells.get_mut(d.index as usize).ok_or(GridError::IndexOutOfRange {
                index: d.index as usize,
                len,
            })?;
            *slot = d.after;
        }
        Ok(GridState { cells })
    }

    /// Cells that differ between `self` and `other`, ascending by index.
    pub fn diff(&self, other: &GridState) -> Result<Vec<CellDiff>, GridError> {
        if self.cells.len() != other.cells.len() {
            return Err(GridError::LengthMismatch {
                expected: self.cells.len(),
                actual: other.cells.len(),
            });
        }
        Ok(self
            .cells
            .iter()
            .zip(&other.cells)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, (a, b))| CellDiff {
                index: i as u32,
                before: *a,
                after: *b,
            })
            .collect())
    }
}
