use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use libm::round;
use serde::{Deserialize, Serialize};

use crate::grid::GridState;
use crate::layer::{Layer, LayerValues};
use crate::spec::{Category, TableSpec};

use super::AnalysisError;

/// Layer value for cells that cannot reach any target.
pub const UNREACHABLE: f64 = -1.0;

const NS_PER_S: f64 = 1e9;

/// Upper bound on a single cell's entry cost, so a path over the whole grid
/// cannot overflow the nanosecond accumulator.
const MAX_ENTRY_NS: u64 = u64::MAX / (crate::spec::MAX_CELLS as u64 + 1);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TravelSpeeds {
    pub road_mps: f64,
    pub walk_mps: f64,
}

impl Default for TravelSpeeds {
    fn default() -> Self {
        TravelSpeeds {
            road_mps: 10.0,
            walk_mps: 1.4,
        }
    }
}

/// Entry cost of every cell in integer nanoseconds; `None` for water.
///
/// Costs are summed as integers so that the total of a path does not depend
/// on the order its cells are added in.
struct CostGrid {
    entry: Vec<Option<u64>>,
    ncols: usize,
    nrows: usize,
}

impl CostGrid {
    fn new(state: &GridState, spec: &TableSpec, speeds: TravelSpeeds) -> Result<Self, AnalysisError> {
        let TravelSpeeds { road_mps, walk_mps } = speeds;
        let bad = AnalysisError::InvalidSpeeds { road_mps, walk_mps };
        if !(walk_mps.is_finite() && road_mps.is_finite() && walk_mps > 0.0 && walk_mps <= road_mps) {
            return Err(bad);
        }
        if state.len() != spec.cell_count() {
            return Err(AnalysisError::DimensionMismatch {
                expected: spec.cell_count(),
                actual: state.len(),
            });
        }
        let cs = spec.cell_size_m();
        let road = round(cs / road_mps * NS_PER_S);
        let walk = round(cs / walk_mps * NS_PER_S);
        if walk > MAX_ENTRY_NS as f64 {
            return Err(bad);
        }
        let (road, walk) = (road as u64, walk as u64);
        let entry = state
            .cells()
            .iter()
            .map(|c| match c.category(spec) {
                Category::Water => None,
                Category::Road => Some(road),
                _ => Some(walk),
            })
            .collect();
        Ok(CostGrid {
            entry,
            ncols: spec.ncols() as usize,
            nrows: spec.nrows() as usize,
        })
    }

    fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> {
        let (c, r) = (i % self.ncols, i / self.ncols);
        let n = self.ncols;
        [
            (c > 0).then(|| i - 1),
            (c + 1 < n).then(|| i + 1),
            (r > 0).then(|| i - n),
            (r + 1 < self.nrows).then(|| i + n),
        ]
        .into_iter()
        .flatten()
    }

    /// Multi-source Dijkstra. With `reverse`, costs are those of reaching the
    /// sources rather than leaving them.
    fn dijkstra(&self, sources: &[usize], reverse: bool) -> Vec<Option<u64>> {
        let mut dist: Vec<Option<u64>> = vec![None; self.entry.len()];
        let mut heap = BinaryHeap::new();
        for &s in sources {
            dist[s] = Some(0);
            heap.push(Reverse((0u64, s)));
        }
        while let Some(Reverse((d, u))) = heap.pop() {
            if dist[u] != Some(d) {
                continue;
            }
            for v in self.neighbors(u) {
                // forward: u -> v enters v; reverse: v -> u enters u
                let Some(step) = self.entry[if reverse { u } else { v }] else {
                    continue;
                };
                let nd = d + step;
                if dist[v].is_none_or(|old| nd < old) {
                    dist[v] = Some(nd);
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        dist
    }
}

fn seconds(ns: u64) -> f64 {
    ns as f64 / NS_PER_S
}

/// Cheapest 4-neighbor travel time from one cell to another, in seconds.
///
/// Entering a cell costs `cell_size_m / speed`, with road speed on road
/// cells and walking speed elsewhere; water cannot be entered. Each cell's
/// cost is rounded to the nanosecond. `Ok(None)` means unreachable.
pub fn trip_duration(
    state: &GridState,
    spec: &TableSpec,
    from: (u32, u32),
    to: (u32, u32),
    speeds: TravelSpeeds,
) -> Result<Option<f64>, AnalysisError> {
    let idx = |(col, row): (u32, u32)| spec.index(col, row).ok_or(AnalysisError::IndexOutOfRange { col, row });
    let (a, b) = (idx(from)?, idx(to)?);
    let grid = CostGrid::new(state, spec, speeds)?;
    if a == b {
        return Ok(Some(0.0));
    }
    Ok(grid.dijkstra(&[a], false)[b].map(seconds))
}

pub fn accessibility_layer_name(target: Category) -> String {
    format!("access_{}", target.as_str())
}

/// Seconds from every cell to the nearest cell of `target`; [`UNREACHABLE`]
/// where no target can be reached.
pub fn accessibility(
    state: &GridState,
    spec: &TableSpec,
    target: Category,
    speeds: TravelSpeeds,
    version: u64,
    producer: &str,
) -> Result<Layer, AnalysisError> {
    let grid = CostGrid::new(state, spec, speeds)?;
    let targets: Vec<usize> = state
        .cells()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.category(spec) == target)
        .map(|(i, _)| i)
        .collect();
    let values = grid
        .dijkstra(&targets, true)
        .into_iter()
        .map(|d| d.map_or(UNREACHABLE, seconds))
        .collect();
    Ok(Layer::new(&accessibility_layer_name(target), LayerValues::Scalar(values), version, producer)
        .expect("travel times are finite"))
}
